from __future__ import annotations

import json
import stat
from pathlib import Path

import pytest

from glitchtriage.synth import PatternSpec, gen_corpus

TESTS_DIR = Path(__file__).parent


@pytest.fixture(scope="session")
def fake_decoder() -> str:
    """Path to the executable decoder stub."""
    script = TESTS_DIR / "fake_ffmpeg.py"
    script.chmod(script.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return str(script)


@pytest.fixture
def fixture_video(tmp_path) -> Path:
    """A 10-second stub clip with five i-frames, in the stub decoder's format."""
    video = tmp_path / "clip_a.vid"
    video.write_text(json.dumps({"duration": 10.0, "iframe_times": [0.0, 1.9, 4.2, 6.0, 8.5]}))
    return video


@pytest.fixture(scope="session")
def small_corpus():
    """A 30+30-video synthetic corpus shared by sequencer/aggregation tests."""
    return gen_corpus(30, 30, PatternSpec(duration_frames=(10, 20), tail_clean_frames=(2, 5), seed=11))
