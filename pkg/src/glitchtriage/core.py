"""Shared domain types, label conventions, and the JSONL schemas used by every stage.

Conventions that hold everywhere downstream: a glitchy frame serializes as the
JSON boolean ``true`` and a clean frame as ``false``; frame indices are 1-based
and contiguous within a video; all value objects are immutable and safe to
share across workers.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class SchemaViolation(PipelineError):
    """An on-disk artifact does not conform to its documented schema."""

    def __init__(self, message: str, *, line: int | None = None, path: str | Path | None = None):
        self.line = line
        self.path = str(path) if path is not None else None
        where = ""
        if self.path is not None:
            where += f" [{self.path}"
            where += f":{line}]" if line is not None else "]"
        elif line is not None:
            where += f" [line {line}]"
        super().__init__(message + where)


class InputError(PipelineError):
    """A required input file or record is missing or unusable."""


class FrameLabel(enum.Enum):
    """Binary frame verdict; glitchy maps to JSON ``true``, clean to ``false``."""

    CLEAN = False
    GLITCHY = True

    @classmethod
    def from_bool(cls, value: bool) -> "FrameLabel":
        return cls.GLITCHY if value else cls.CLEAN

    def to_bool(self) -> bool:
        return self.value

    def __repr__(self) -> str:  # "FrameLabel.CLEAN" reads better than the bool value
        return f"FrameLabel.{self.name}"


class GlitchType(enum.Enum):
    """The five injected glitch categories used by the controlled corpus."""

    MISSING_OBJECT = "MissingObject"
    CLIPPING = "Clipping"
    FLOATING = "Floating"
    CORRUPTED_TEXTURE = "CorruptedTexture"
    LIGHTING_ISSUE = "LightingIssue"


class PromptKind(enum.Enum):
    """Which prompt template a frame was judged with."""

    SINGLE_FRAME = "SingleFrame"
    PAIR_CLEAN_REF = "PairCleanRef"
    PAIR_GLITCHY_REF = "PairGlitchyRef"


class ParseStatus(enum.Enum):
    """How the model's raw response was turned into a verdict."""

    OK = "Ok"
    RECOVERED = "Recovered"
    FAILED = "Failed"


@dataclass(frozen=True)
class ExtractionMode:
    """Keyframe sampling mode: intra-coded frames, or a fixed sampling rate."""

    kind: str  # "IFrames" | "FixedFps"
    fps: float | None = None

    IFRAMES_KIND = "IFrames"
    FIXED_FPS_KIND = "FixedFps"

    def __post_init__(self) -> None:
        if self.kind == self.IFRAMES_KIND:
            if self.fps is not None:
                raise ValueError("IFrames mode takes no fps")
        elif self.kind == self.FIXED_FPS_KIND:
            if self.fps is None or self.fps <= 0:
                raise ValueError("FixedFps mode requires fps > 0")
        else:
            raise ValueError(f"unknown extraction mode kind: {self.kind!r}")

    @classmethod
    def iframes(cls) -> "ExtractionMode":
        return cls(cls.IFRAMES_KIND)

    @classmethod
    def fixed_fps(cls, fps: float) -> "ExtractionMode":
        return cls(cls.FIXED_FPS_KIND, float(fps))

    def to_json_dict(self) -> dict[str, Any]:
        if self.kind == self.IFRAMES_KIND:
            return {"kind": self.kind}
        return {"kind": self.kind, "fps": self.fps}

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "ExtractionMode":
        return cls(obj["kind"], obj.get("fps"))


@dataclass(frozen=True)
class Keyframe:
    """One extracted frame: 1-based index, decoder timestamp, and image location."""

    video_id: str
    index: int
    timestamp_s: float
    image_path: str

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"frame index must be >= 1, got {self.index}")
        if self.timestamp_s < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp_s}")


@dataclass(frozen=True)
class KeyframeManifest:
    """Ordered record of the frames extracted from one video.

    Construction enforces the manifest invariants: at least one frame, indices
    contiguous from 1, timestamps strictly increasing, one video id throughout.
    """

    video_id: str
    mode: ExtractionMode
    frames: tuple[Keyframe, ...]
    source_video: str
    decoder_argv: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "decoder_argv", tuple(self.decoder_argv))
        if not self.frames:
            raise ValueError("manifest must contain at least one frame")
        for t, frame in enumerate(self.frames, start=1):
            if frame.video_id != self.video_id:
                raise ValueError(f"frame {t} has video_id {frame.video_id!r}, expected {self.video_id!r}")
            if frame.index != t:
                raise ValueError(f"frame indices must be contiguous from 1; position {t} has index {frame.index}")
        timestamps = [f.timestamp_s for f in self.frames]
        if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
            raise ValueError("frame timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class FramePrediction:
    """One model verdict for one frame, with full provenance.

    Instances are plain records: invariant checking is intentionally deferred to
    :func:`validate_prediction_log` so that logs read from disk can be held and
    audited even when they break the contract.
    """

    video_id: str
    frame_index: int
    label: FrameLabel
    reasoning: str
    prompt_kind: PromptKind
    backend_id: str
    raw_response_digest: str
    parse_status: ParseStatus
    timestamp_s: float | None = None
    reference_index: int | None = None
    reference_label: FrameLabel | None = None
    reference_path: str | None = None  # set only for curated references outside the pool

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "video_id": self.video_id,
            "frame_index": self.frame_index,
            "timestamp_s": self.timestamp_s,
            "label": self.label.to_bool(),
            "reasoning": self.reasoning,
            "prompt_kind": self.prompt_kind.value,
            "reference_index": self.reference_index,
            "reference_label": None if self.reference_label is None else self.reference_label.to_bool(),
            "backend_id": self.backend_id,
            "raw_response_digest": self.raw_response_digest,
            "parse_status": self.parse_status.value,
        }
        if self.reference_path is not None:
            out["reference_path"] = self.reference_path
        return out

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "FramePrediction":
        ref_label = obj.get("reference_label")
        return cls(
            video_id=obj["video_id"],
            frame_index=obj["frame_index"],
            timestamp_s=obj.get("timestamp_s"),
            label=FrameLabel.from_bool(obj["label"]),
            reasoning=obj.get("reasoning", ""),
            prompt_kind=PromptKind(obj["prompt_kind"]),
            reference_index=obj.get("reference_index"),
            reference_label=None if ref_label is None else FrameLabel.from_bool(ref_label),
            backend_id=obj.get("backend_id", ""),
            raw_response_digest=obj.get("raw_response_digest", ""),
            parse_status=ParseStatus(obj.get("parse_status", "Ok")),
            reference_path=obj.get("reference_path"),
        )


@dataclass(frozen=True)
class VideoRecord:
    """Dataset entry for one video: location, optional ground truth, provenance tag."""

    video_id: str
    path: str
    video_label: FrameLabel | None = None
    glitch_type: GlitchType | None = None
    source_tag: str = ""

    def __post_init__(self) -> None:
        if self.glitch_type is not None and self.video_label is not FrameLabel.GLITCHY:
            raise ValueError(f"{self.video_id}: glitch_type requires video_label = Glitchy")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "path": self.path,
            "video_label": None if self.video_label is None else self.video_label.to_bool(),
            "glitch_type": None if self.glitch_type is None else self.glitch_type.value,
            "source_tag": self.source_tag,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "VideoRecord":
        label = obj.get("video_label")
        gtype = obj.get("glitch_type")
        return cls(
            video_id=obj["video_id"],
            path=obj["path"],
            video_label=None if label is None else FrameLabel.from_bool(label),
            glitch_type=None if gtype is None else GlitchType(gtype),
            source_tag=obj.get("source_tag", ""),
        )


@dataclass(frozen=True)
class VideoVerdict:
    """A single video-level decision; score is present only for learned aggregators."""

    video_id: str
    label: FrameLabel
    aggregator_id: str
    score: float | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "label": self.label.to_bool(),
            "aggregator_id": self.aggregator_id,
            "score": self.score,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "VideoVerdict":
        return cls(
            video_id=obj["video_id"],
            label=FrameLabel.from_bool(obj["label"]),
            aggregator_id=obj.get("aggregator_id", ""),
            score=obj.get("score"),
        )


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def validate_prediction_log(log: Sequence[FramePrediction]) -> list[str]:
    """Check a prediction log against the per-video contract.

    Returns a list of human-readable violations; an empty list means the log is
    valid. Expects the log sorted by (video_id, frame_index). Violations are
    data, not failures: invalid logs are returned for inspection, never raised.
    """
    violations: list[str] = []
    expected_index: int = 1
    current_video: str | None = None
    for pred in log:
        if pred.video_id != current_video:
            current_video = pred.video_id
            expected_index = 1
        where = f"{pred.video_id}[t={pred.frame_index}]"
        if pred.frame_index != expected_index:
            violations.append(f"{where}: indices not contiguous from 1 (expected t={expected_index})")
            expected_index = pred.frame_index + 1
        else:
            expected_index += 1

        single = pred.prompt_kind is PromptKind.SINGLE_FRAME
        if single and pred.reference_index is not None:
            violations.append(f"{where}: single-frame prompt must not carry a reference")
        if not single and pred.reference_index is None:
            violations.append(f"{where}: pair prompt requires a reference index")
        if pred.reference_index is not None:
            if pred.reference_index >= pred.frame_index:
                violations.append(f"{where}: reference not strictly earlier (ref={pred.reference_index})")
            if pred.prompt_kind is PromptKind.PAIR_CLEAN_REF and pred.reference_label is not FrameLabel.CLEAN:
                violations.append(f"{where}: clean-reference prompt requires reference_label = Clean")
            if pred.prompt_kind is PromptKind.PAIR_GLITCHY_REF and pred.reference_label is not FrameLabel.GLITCHY:
                violations.append(f"{where}: glitchy-reference prompt requires reference_label = Glitchy")
        # The pool is empty at t=1, so the first frame must be single-frame
        # prompted unless its reference came from outside the pool (index 0).
        if pred.frame_index == 1 and not single and pred.reference_index != 0:
            violations.append(f"{where}: first frame must be single-frame prompted")
    return violations


def dumps_json_line(obj: Mapping[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(path: str | Path, rows: Iterable[Mapping[str, Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps_json_line(row) + "\n")


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, parsed_object) pairs, skipping blank lines."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"malformed JSON: {exc.msg}", line=lineno, path=path) from exc
            if not isinstance(obj, dict):
                raise SchemaViolation("each line must hold a JSON object", line=lineno, path=path)
            yield lineno, obj


def write_prediction_log(predictions: Iterable[FramePrediction], path: str | Path) -> None:
    write_jsonl(path, (p.to_json_dict() for p in predictions))


def read_prediction_log(path: str | Path) -> list[FramePrediction]:
    out: list[FramePrediction] = []
    for lineno, obj in read_jsonl(path):
        try:
            out.append(FramePrediction.from_json_dict(obj))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad prediction record: {exc}", line=lineno, path=path) from exc
    return out


def write_dataset_manifest(records: Iterable[VideoRecord], path: str | Path) -> None:
    write_jsonl(path, (r.to_json_dict() for r in records))


def read_dataset_manifest(path: str | Path) -> list[VideoRecord]:
    """Load VideoRecords; duplicate video ids are a hard error at ingestion."""
    out: list[VideoRecord] = []
    seen: set[str] = set()
    for lineno, obj in read_jsonl(path):
        try:
            record = VideoRecord.from_json_dict(obj)
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad video record: {exc}", line=lineno, path=path) from exc
        if record.video_id in seen:
            raise SchemaViolation(f"duplicate video_id {record.video_id!r}", line=lineno, path=path)
        seen.add(record.video_id)
        out.append(record)
    return out


def group_predictions_by_video(log: Sequence[FramePrediction]) -> dict[str, list[FramePrediction]]:
    """Group a log by video, each group sorted by frame index."""
    groups: dict[str, list[FramePrediction]] = {}
    for pred in log:
        groups.setdefault(pred.video_id, []).append(pred)
    for preds in groups.values():
        preds.sort(key=lambda p: p.frame_index)
    return groups
