"""Synthetic ground-truth corpora following the controlled glitch-video pattern.

Every glitchy video starts clean, turns glitchy for one contiguous span
beginning about a third of the way in, and ends clean again. Generation is
pure label streams plus placeholder manifests: no pixels are rendered, so the
simulated backend can drive end-to-end experiments from the truth table alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .core import (
    ExtractionMode,
    FrameLabel,
    GlitchType,
    Keyframe,
    KeyframeManifest,
    SchemaViolation,
    VideoRecord,
    read_jsonl,
    write_jsonl,
)
from .rng import stable_generator

SYNTHETIC_SOURCE_TAG = "synthetic"


@dataclass(frozen=True)
class PatternSpec:
    """Temporal shape of a synthetic clip, in keyframe counts.

    ``duration_frames`` and ``tail_clean_frames`` are inclusive ranges sampled
    per video; the glitch onset lands at ``onset_fraction * T`` give or take
    ``onset_jitter_frames``, and the glitchy span runs from onset to the start
    of the clean tail.
    """

    duration_frames: tuple[int, int] = (25, 90)  # 5-18 s sampled at 5 FPS
    onset_fraction: float = 1 / 3
    onset_jitter_frames: int = 2
    tail_clean_frames: tuple[int, int] = (5, 15)
    glitch_type: GlitchType | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.duration_frames
        if not 1 <= lo <= hi:
            raise ValueError("duration range must satisfy 1 <= lo <= hi")
        if not 0.0 < self.onset_fraction < 1.0:
            raise ValueError("onset fraction must lie in (0, 1)")
        tlo, thi = self.tail_clean_frames
        if not 1 <= tlo <= thi:
            raise ValueError("tail range must satisfy 1 <= lo <= hi")
        if self.onset_jitter_frames < 0:
            raise ValueError("onset jitter must be >= 0")
        if lo < 4:
            raise ValueError("durations below 4 frames cannot fit prefix + span + tail")


def gen_truth_sequence(spec: PatternSpec, video_index: int, glitchy: bool = True) -> list[FrameLabel]:
    """Deterministic per-video truth labels; the all-clean variant when not glitchy.

    A glitchy sequence has exactly one maximal glitchy run: a clean prefix of
    at least one frame, the span, then a clean tail of at least one frame.
    """
    rng = stable_generator("synthtruth", spec.seed, video_index)
    lo, hi = spec.duration_frames
    duration = int(rng.integers(lo, hi + 1))
    if not glitchy:
        return [FrameLabel.CLEAN] * duration

    tlo, thi = spec.tail_clean_frames
    tail = int(rng.integers(tlo, min(thi, duration - 3) + 1)) if duration - 3 >= tlo else 1
    jitter = int(rng.integers(-spec.onset_jitter_frames, spec.onset_jitter_frames + 1))
    onset = round(spec.onset_fraction * duration) + jitter
    end = duration - tail  # last glitchy frame, keeping the tail clean
    onset = max(2, min(onset, end))  # first frame stays clean, span stays non-empty

    labels = [FrameLabel.CLEAN] * duration
    for t in range(onset, end + 1):
        labels[t - 1] = FrameLabel.GLITCHY
    return labels


@dataclass(frozen=True)
class Corpus:
    records: tuple[VideoRecord, ...]
    truth: dict[tuple[str, int], FrameLabel]
    manifests: tuple[KeyframeManifest, ...]


def gen_corpus(n_glitchy: int, n_clean: int, spec: PatternSpec, fps: float = 5.0) -> Corpus:
    """Generate a balanced corpus: records, per-frame truth, placeholder manifests.

    Glitch types are assigned round-robin over the five categories, so counts
    divisible by five come out exactly balanced; a spec with a fixed
    ``glitch_type`` assigns that type to every glitchy video instead.
    Determinism: the same spec always yields byte-identical output.
    """
    if n_glitchy < 0 or n_clean < 0:
        raise ValueError("corpus counts must be >= 0")
    types = [spec.glitch_type] if spec.glitch_type is not None else list(GlitchType)
    records: list[VideoRecord] = []
    manifests: list[KeyframeManifest] = []
    truth: dict[tuple[str, int], FrameLabel] = {}
    total = n_glitchy + n_clean
    for index in range(total):
        is_glitchy = index < n_glitchy
        video_id = f"synthetic_{index:05d}"
        labels = gen_truth_sequence(spec, index, glitchy=is_glitchy)
        for t, label in enumerate(labels, start=1):
            truth[(video_id, t)] = label
        path = f"synthetic://{video_id}"
        records.append(
            VideoRecord(
                video_id=video_id,
                path=path,
                video_label=FrameLabel.GLITCHY if is_glitchy else FrameLabel.CLEAN,
                glitch_type=types[index % len(types)] if is_glitchy else None,
                source_tag=SYNTHETIC_SOURCE_TAG,
            )
        )
        frames = tuple(
            Keyframe(
                video_id=video_id,
                index=t,
                timestamp_s=(t - 1) / fps,
                image_path=f"synthetic://{video_id}/{t:05d}.png",
            )
            for t in range(1, len(labels) + 1)
        )
        manifests.append(
            KeyframeManifest(
                video_id=video_id,
                mode=ExtractionMode.fixed_fps(fps),
                frames=frames,
                source_video=path,
            )
        )
    return Corpus(records=tuple(records), truth=truth, manifests=tuple(manifests))


def write_truth_table(truth: dict[tuple[str, int], FrameLabel], path: str | Path) -> None:
    rows = (
        {"video_id": video_id, "frame_index": t, "truth_label": label.to_bool()}
        for (video_id, t), label in truth.items()
    )
    write_jsonl(path, rows)


def load_truth_table(path: str | Path) -> dict[tuple[str, int], FrameLabel]:
    truth: dict[tuple[str, int], FrameLabel] = {}
    for lineno, obj in read_jsonl(path):
        try:
            key = (obj["video_id"], int(obj["frame_index"]))
            label = FrameLabel.from_bool(bool(obj["truth_label"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad truth record: {exc}", line=lineno, path=path) from exc
        if key in truth:
            raise SchemaViolation(f"duplicate truth for {key[0]}[t={key[1]}]", line=lineno, path=path)
        truth[key] = label
    return truth
