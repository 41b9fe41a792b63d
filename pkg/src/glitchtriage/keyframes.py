"""Keyframe extraction by driving an external video decoder as a subprocess.

Two sampling modes share one manifest schema: intra-coded frames only (the
decoder selects pictures with ``pict_type I``) or a fixed sampling rate. The
decoder's ``showinfo`` filter supplies per-frame timestamps; the exact argument
vector is recorded verbatim in the manifest for provenance. No in-process
decoding happens here.
"""

from __future__ import annotations

import json
import os
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .core import (
    ExtractionMode,
    InputError,
    Keyframe,
    KeyframeManifest,
    PipelineError,
    SchemaViolation,
)

DECODER_ENV_VAR = "GLITCHTRIAGE_FFMPEG"
_DEFAULT_DECODER = "ffmpeg"

MANIFEST_FORMAT_VERSION = 1

_PTS_TIME_RE = re.compile(r"\bpts_time:\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)")


class DecoderNotFound(PipelineError):
    """The decoder binary could not be executed."""


class DecodeFailed(PipelineError):
    """The decoder exited with an error; carries a stderr excerpt."""


class EmptyOutput(PipelineError):
    """The decoder ran but produced zero frames."""


class MissingAsset(PipelineError):
    """A manifest references an image file that does not exist."""


@dataclass(frozen=True)
class ImageFormat:
    """Output image encoding: PNG, or JPEG with a 1-100 quality setting."""

    kind: str  # "PNG" | "JPEG"
    quality: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "PNG":
            if self.quality is not None:
                raise ValueError("PNG takes no quality setting")
        elif self.kind == "JPEG":
            if self.quality is None or not 1 <= self.quality <= 100:
                raise ValueError("JPEG quality must be in 1..100")
        else:
            raise ValueError(f"unknown image format: {self.kind!r}")

    @property
    def extension(self) -> str:
        return "png" if self.kind == "PNG" else "jpg"


@dataclass(frozen=True)
class ExtractionConfig:
    """How to turn one video file into a keyframe manifest."""

    mode: ExtractionMode
    output_dir: Path
    image_format: ImageFormat = ImageFormat("PNG")
    decoder_binary: str | None = None  # None: $GLITCHTRIAGE_FFMPEG, else "ffmpeg"

    def resolve_decoder(self) -> str:
        if self.decoder_binary:
            return self.decoder_binary
        return os.environ.get(DECODER_ENV_VAR, _DEFAULT_DECODER)


def build_decoder_argv(video: Path, cfg: ExtractionConfig, video_id: str) -> list[str]:
    """Argument vector handed to the decoder, also stored in the manifest.

    The i-frame invocation selects intra-coded pictures and emits one image per
    selected frame in variable-frame-rate mode; ``showinfo`` prints the decode
    timestamp of every emitted frame on stderr.
    """
    if cfg.mode.kind == ExtractionMode.IFRAMES_KIND:
        vf = "select=eq(pict_type\\,I),showinfo"
        sync = ["-vsync", "vfr"]
    else:
        vf = f"fps={cfg.mode.fps:g},showinfo"
        sync = []
    quality: list[str] = []
    if cfg.image_format.kind == "JPEG":
        # ffmpeg qscale runs 2 (best) to 31 (worst); map quality 100 -> 2, 1 -> 31.
        qscale = round(31 - (cfg.image_format.quality - 1) * 29 / 99)
        quality = ["-q:v", str(qscale)]
    pattern = str(Path(cfg.output_dir) / f"{video_id}_%05d.{cfg.image_format.extension}")
    return [
        cfg.resolve_decoder(),
        "-hide_banner",
        "-nostdin",
        "-i",
        str(video),
        "-vf",
        vf,
        *sync,
        *quality,
        pattern,
    ]


def extract_keyframes(video: str | Path, cfg: ExtractionConfig, video_id: str | None = None) -> KeyframeManifest:
    """Run the decoder over one video and build its keyframe manifest.

    Images land in ``cfg.output_dir`` named ``<video_id>_<index:05>.<ext>`` with
    indices starting at 1; timestamps come from the decoder's showinfo output.
    """
    video = Path(video)
    if not video.exists():
        raise InputError(f"no such video: {video}")
    video_id = video_id or video.stem
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    argv = build_decoder_argv(video, cfg, video_id)
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except FileNotFoundError as exc:
        raise DecoderNotFound(f"decoder binary not found: {argv[0]}") from exc
    if proc.returncode != 0:
        excerpt = proc.stderr.strip().splitlines()[-8:]
        raise DecodeFailed(f"{video_id}: decoder exited {proc.returncode}: " + " | ".join(excerpt))

    timestamps = [float(m.group(1)) for m in _PTS_TIME_RE.finditer(proc.stderr)]
    ext = cfg.image_format.extension
    images = sorted(out_dir.glob(f"{video_id}_*.{ext}"))
    if not images:
        raise EmptyOutput(f"{video_id}: decoder produced no frames")
    if len(timestamps) != len(images):
        raise DecodeFailed(
            f"{video_id}: decoder reported {len(timestamps)} timestamps for {len(images)} images"
        )

    frames = tuple(
        Keyframe(video_id=video_id, index=t, timestamp_s=ts, image_path=str(img))
        for t, (ts, img) in enumerate(zip(timestamps, images), start=1)
    )
    return KeyframeManifest(
        video_id=video_id,
        mode=cfg.mode,
        frames=frames,
        source_video=str(video),
        decoder_argv=tuple(argv),
    )


def manifest_path_for(video_id: str, directory: str | Path) -> Path:
    return Path(directory) / f"{video_id}.manifest.json"


def write_manifest(manifest: KeyframeManifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "video_id": manifest.video_id,
        "mode": manifest.mode.to_json_dict(),
        "source_video": manifest.source_video,
        "decoder_argv": list(manifest.decoder_argv),
        "frames": [
            {"index": f.index, "timestamp_s": f.timestamp_s, "image_path": f.image_path}
            for f in manifest.frames
        ],
    }
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_manifest(path: str | Path, strict: bool = False) -> KeyframeManifest:
    """Read a manifest back; ``strict`` additionally verifies every image exists."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such manifest: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"malformed JSON: {exc.msg}", line=exc.lineno, path=path) from exc
    try:
        frames = tuple(
            Keyframe(
                video_id=doc["video_id"],
                index=f["index"],
                timestamp_s=f["timestamp_s"],
                image_path=f["image_path"],
            )
            for f in doc["frames"]
        )
        manifest = KeyframeManifest(
            video_id=doc["video_id"],
            mode=ExtractionMode.from_json_dict(doc["mode"]),
            frames=frames,
            source_video=doc.get("source_video", ""),
            decoder_argv=tuple(doc.get("decoder_argv", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"invalid manifest: {exc}", path=path) from exc
    if strict:
        for frame in manifest.frames:
            img = Path(frame.image_path)
            if not img.is_absolute():
                img = path.parent / img
            if not img.exists():
                raise MissingAsset(f"{manifest.video_id}[t={frame.index}]: missing image {frame.image_path}")
    return manifest
