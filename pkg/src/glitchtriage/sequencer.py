"""Sequential reference-guided prompting over one video's keyframes.

Frames are processed strictly in index order. Each verdict is deposited into a
per-video reference pool together with its predicted label; the selection
policy consults only that pool (plus, for curated pairs, an external table),
so references are always strictly earlier than the frame under test.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .backends import ModelBackend, QueryContext
from .core import (
    FrameLabel,
    FramePrediction,
    InputError,
    Keyframe,
    KeyframeManifest,
    PromptKind,
    SchemaViolation,
    read_jsonl,
    sha256_hex,
)
from .prompting import CategorySet, parse_verdict, render_prompt
from .rng import stable_generator

EXTERNAL_REFERENCE_INDEX = 0  # curated references live outside the pool


class PolicyKind(enum.Enum):
    NO_REF = "NoRef"
    LAST_CLEAN_FRAME = "LastCleanFrame"
    PREVIOUS_FRAME = "PreviousFrame"
    RANDOM_FRAME = "RandomFrame"
    MANUAL_PAIRS = "ManualPairs"


@dataclass(frozen=True)
class ReferencePolicy:
    """How to pick the reference frame for each test frame."""

    kind: PolicyKind
    seed: int = 0
    pair_table: Mapping[tuple[str, int], str] | None = None

    def __post_init__(self) -> None:
        if self.kind is PolicyKind.MANUAL_PAIRS and self.pair_table is None:
            raise ValueError("ManualPairs policy requires a pair table")

    @classmethod
    def no_ref(cls) -> "ReferencePolicy":
        return cls(PolicyKind.NO_REF)

    @classmethod
    def last_clean_frame(cls) -> "ReferencePolicy":
        return cls(PolicyKind.LAST_CLEAN_FRAME)

    @classmethod
    def previous_frame(cls) -> "ReferencePolicy":
        return cls(PolicyKind.PREVIOUS_FRAME)

    @classmethod
    def random_frame(cls, seed: int) -> "ReferencePolicy":
        return cls(PolicyKind.RANDOM_FRAME, seed=seed)

    @classmethod
    def manual_pairs(cls, pair_table: Mapping[tuple[str, int], str]) -> "ReferencePolicy":
        return cls(PolicyKind.MANUAL_PAIRS, pair_table=dict(pair_table))


@dataclass(frozen=True)
class PoolEntry:
    frame: Keyframe
    label: FrameLabel


class ReferencePool:
    """Append-only store of processed frames with their predicted labels."""

    def __init__(self) -> None:
        self._entries: list[PoolEntry] = []

    def append(self, frame: Keyframe, label: FrameLabel) -> None:
        self._entries.append(PoolEntry(frame, label))

    @property
    def entries(self) -> tuple[PoolEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


def select_reference(pool: ReferencePool, policy: ReferencePolicy, t: int) -> PoolEntry | None:
    """Pick the reference entry for test frame ``t`` from the pool, if any.

    The pool must hold exactly the t-1 earlier frames. NoRef never selects;
    every policy returns None at t=1 because the pool is empty. LastCleanFrame
    returns the highest-index clean entry, falling back to the previous frame
    (with its glitchy label) when nothing in the pool is clean.
    """
    if policy.kind is PolicyKind.MANUAL_PAIRS:
        raise ValueError("ManualPairs references are resolved from the pair table, not the pool")
    if len(pool) != t - 1:
        raise ValueError(f"pool holds {len(pool)} entries, expected {t - 1}")
    entries = pool.entries
    if policy.kind is PolicyKind.NO_REF or not entries:
        return None
    if policy.kind is PolicyKind.PREVIOUS_FRAME:
        return entries[-1]
    if policy.kind is PolicyKind.LAST_CLEAN_FRAME:
        for entry in reversed(entries):
            if entry.label is FrameLabel.CLEAN:
                return entry
        return entries[-1]
    if policy.kind is PolicyKind.RANDOM_FRAME:
        video_id = entries[0].frame.video_id
        rng = stable_generator("randframe", policy.seed, video_id, t)
        return entries[int(rng.integers(0, len(entries)))]
    raise ValueError(f"unhandled policy kind {policy.kind}")


def process_video(
    manifest: KeyframeManifest,
    policy: ReferencePolicy,
    backend: ModelBackend,
    cats: CategorySet,
    *,
    default_on_fail: FrameLabel = FrameLabel.CLEAN,
    existing: Sequence[FramePrediction] | None = None,
) -> list[FramePrediction]:
    """Run the sequential prompting loop over one video and return its full log.

    ``existing`` resumes a partial log: those predictions must form the prefix
    1..k of this video; their labels re-seed the pool and frames k+1..T are
    processed. Backend failures abort this video only, annotated with the
    frame position.
    """
    video_id = manifest.video_id
    pool = ReferencePool()
    predictions: list[FramePrediction] = []

    if existing:
        for offset, pred in enumerate(existing, start=1):
            if pred.video_id != video_id or pred.frame_index != offset:
                raise InputError(f"{video_id}: existing log is not a contiguous prefix at t={offset}")
        if len(existing) > len(manifest):
            raise InputError(f"{video_id}: existing log has more frames than the manifest")
        for pred in existing:
            pool.append(manifest.frames[pred.frame_index - 1], pred.label)
            predictions.append(pred)

    for t in range(len(predictions) + 1, len(manifest) + 1):
        frame = manifest.frames[t - 1]
        reference_path: str | None = None
        if policy.kind is PolicyKind.MANUAL_PAIRS:
            try:
                reference_path = policy.pair_table[(video_id, t)]
            except KeyError:
                raise InputError(f"{video_id}[t={t}]: no entry in the pair table") from None
            kind = PromptKind.PAIR_CLEAN_REF
            reference_index: int | None = EXTERNAL_REFERENCE_INDEX
            reference_label: FrameLabel | None = FrameLabel.CLEAN
            images = [reference_path, frame.image_path]
        else:
            entry = select_reference(pool, policy, t)
            if entry is None:
                kind = PromptKind.SINGLE_FRAME
                reference_index = None
                reference_label = None
                images = [frame.image_path]
            else:
                reference_label = entry.label
                reference_index = entry.frame.index
                kind = (
                    PromptKind.PAIR_CLEAN_REF
                    if reference_label is FrameLabel.CLEAN
                    else PromptKind.PAIR_GLITCHY_REF
                )
                images = [entry.frame.image_path, frame.image_path]

        prompt = render_prompt(kind, cats)
        ctx = QueryContext(video_id, t, kind)
        try:
            raw = backend.query(prompt, images, ctx)
        except Exception as exc:
            raise type(exc)(f"{video_id}[t={t}]: {exc}") from exc
        verdict = parse_verdict(raw, default_on_fail)
        label = FrameLabel.from_bool(verdict.glitch_detected)
        predictions.append(
            FramePrediction(
                video_id=video_id,
                frame_index=t,
                timestamp_s=frame.timestamp_s,
                label=label,
                reasoning=verdict.reasoning,
                prompt_kind=kind,
                reference_index=reference_index,
                reference_label=reference_label,
                reference_path=reference_path,
                backend_id=backend.backend_id,
                raw_response_digest=sha256_hex(raw),
                parse_status=verdict.parse_status,
            )
        )
        # Failed parses deposit their defaulted label too, keeping |pool| = t.
        pool.append(frame, label)

    return predictions


def load_pair_table(path: str | Path) -> dict[tuple[str, int], str]:
    """Read a curated-reference table: JSONL of {video_id, frame_index, reference_path}."""
    table: dict[tuple[str, int], str] = {}
    for lineno, obj in read_jsonl(path):
        try:
            key = (obj["video_id"], int(obj["frame_index"]))
            value = obj["reference_path"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad pair-table record: {exc}", line=lineno, path=path) from exc
        if key in table:
            raise SchemaViolation(f"duplicate pair for {key[0]}[t={key[1]}]", line=lineno, path=path)
        table[key] = value
    return table
