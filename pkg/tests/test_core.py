from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from glitchtriage.core import (
    ExtractionMode,
    FrameLabel,
    FramePrediction,
    GlitchType,
    ParseStatus,
    PromptKind,
    SchemaViolation,
    VideoRecord,
    VideoVerdict,
    read_dataset_manifest,
    read_prediction_log,
    validate_prediction_log,
    write_dataset_manifest,
    write_prediction_log,
)

PREDICTION_LOG_KEYS = [
    "video_id",
    "frame_index",
    "timestamp_s",
    "label",
    "reasoning",
    "prompt_kind",
    "reference_index",
    "reference_label",
    "backend_id",
    "raw_response_digest",
    "parse_status",
]


def pred(video_id="v1", t=1, kind=PromptKind.SINGLE_FRAME, ref=None, ref_label=None, label=FrameLabel.CLEAN):
    return FramePrediction(
        video_id=video_id,
        frame_index=t,
        timestamp_s=(t - 1) / 5.0,
        label=label,
        reasoning="r",
        prompt_kind=kind,
        reference_index=ref,
        reference_label=ref_label,
        backend_id="test",
        raw_response_digest="00",
        parse_status=ParseStatus.OK,
    )


def valid_log():
    return [
        pred(t=1),
        pred(t=2, kind=PromptKind.PAIR_CLEAN_REF, ref=1, ref_label=FrameLabel.CLEAN),
        pred(t=3, kind=PromptKind.PAIR_CLEAN_REF, ref=1, ref_label=FrameLabel.CLEAN),
    ]


class TestValidatePredictionLog:
    def test_valid_log_passes(self):
        assert validate_prediction_log(valid_log()) == []

    def test_reference_not_strictly_earlier(self):
        log = valid_log()
        log[1] = pred(t=2, kind=PromptKind.PAIR_CLEAN_REF, ref=2, ref_label=FrameLabel.CLEAN)
        violations = validate_prediction_log(log)
        assert any("reference not strictly earlier" in v for v in violations)

    def test_first_frame_must_be_single_frame(self):
        log = [pred(t=1, kind=PromptKind.PAIR_CLEAN_REF, ref=None, ref_label=FrameLabel.CLEAN)]
        violations = validate_prediction_log(log)
        assert any("first frame must be single-frame prompted" in v for v in violations)

    def test_first_frame_with_external_reference_is_allowed(self):
        # Curated references live outside the pool, so index 0 at t=1 is legal.
        log = [pred(t=1, kind=PromptKind.PAIR_CLEAN_REF, ref=0, ref_label=FrameLabel.CLEAN)]
        assert validate_prediction_log(log) == []

    def test_gap_in_indices(self):
        log = [pred(t=1), pred(t=3, kind=PromptKind.PAIR_CLEAN_REF, ref=1, ref_label=FrameLabel.CLEAN)]
        assert any("contiguous" in v for v in validate_prediction_log(log))

    def test_kind_and_reference_label_must_agree(self):
        log = valid_log()
        log[2] = pred(t=3, kind=PromptKind.PAIR_GLITCHY_REF, ref=1, ref_label=FrameLabel.CLEAN)
        assert any("requires reference_label = Glitchy" in v for v in validate_prediction_log(log))

    def test_single_frame_with_reference_is_flagged(self):
        log = [pred(t=1, kind=PromptKind.SINGLE_FRAME, ref=1, ref_label=FrameLabel.CLEAN)]
        assert any("must not carry a reference" in v for v in validate_prediction_log(log))

    def test_multiple_videos_reset_index_expectations(self):
        log = valid_log() + [pred(video_id="v2", t=1)]
        assert validate_prediction_log(log) == []


labels = st.sampled_from([FrameLabel.CLEAN, FrameLabel.GLITCHY])
texts = st.text(max_size=40)


@st.composite
def predictions(draw):
    kind = draw(st.sampled_from(list(PromptKind)))
    t = draw(st.integers(min_value=1, max_value=500))
    if kind is PromptKind.SINGLE_FRAME:
        ref, ref_label = None, None
    else:
        ref = draw(st.integers(min_value=0, max_value=t - 1))
        ref_label = FrameLabel.CLEAN if kind is PromptKind.PAIR_CLEAN_REF else FrameLabel.GLITCHY
    return FramePrediction(
        video_id=draw(st.text(min_size=1, max_size=12)),
        frame_index=t,
        timestamp_s=draw(st.one_of(st.none(), st.floats(0, 1e6, allow_nan=False))),
        label=draw(labels),
        reasoning=draw(texts),
        prompt_kind=kind,
        reference_index=ref,
        reference_label=ref_label,
        backend_id=draw(texts),
        raw_response_digest=draw(st.text(alphabet="0123456789abcdef", min_size=4, max_size=64)),
        parse_status=draw(st.sampled_from(list(ParseStatus))),
    )


@given(predictions())
def test_prediction_json_round_trip(p):
    assert FramePrediction.from_json_dict(p.to_json_dict()) == p


@given(labels, st.booleans())
def test_frame_label_bool_round_trip(label, raw):
    assert FrameLabel.from_bool(label.to_bool()) is label
    assert FrameLabel.from_bool(raw).to_bool() is raw


@st.composite
def video_records(draw):
    label = draw(st.sampled_from([None, FrameLabel.CLEAN, FrameLabel.GLITCHY]))
    gtype = draw(st.sampled_from(list(GlitchType))) if label is FrameLabel.GLITCHY and draw(st.booleans()) else None
    return VideoRecord(
        video_id=draw(st.text(min_size=1, max_size=12)),
        path=draw(st.text(min_size=1, max_size=24)),
        video_label=label,
        glitch_type=gtype,
        source_tag=draw(texts),
    )


@given(video_records())
def test_video_record_json_round_trip(record):
    assert VideoRecord.from_json_dict(record.to_json_dict()) == record


@given(st.text(min_size=1, max_size=12), labels, texts, st.one_of(st.none(), st.floats(0, 1, allow_nan=False)))
def test_video_verdict_json_round_trip(video_id, label, aggregator_id, score):
    verdict = VideoVerdict(video_id, label, aggregator_id, score)
    assert VideoVerdict.from_json_dict(verdict.to_json_dict()) == verdict


def test_prediction_log_wire_keys_and_order(tmp_path):
    path = tmp_path / "log.jsonl"
    write_prediction_log(valid_log(), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert list(first) == PREDICTION_LOG_KEYS
    # absent optionals serialize as null; glitchy maps to true
    assert first["reference_index"] is None
    assert first["reference_label"] is None
    assert first["label"] is False


def test_prediction_log_file_round_trip(tmp_path):
    path = tmp_path / "log.jsonl"
    write_prediction_log(valid_log(), path)
    assert read_prediction_log(path) == valid_log()


def test_read_prediction_log_rejects_malformed(tmp_path):
    path = tmp_path / "log.jsonl"
    path.write_text('{"video_id": "v"\n')
    with pytest.raises(SchemaViolation) as err:
        read_prediction_log(path)
    assert err.value.line == 1


class TestVideoRecord:
    def test_round_trip(self, tmp_path):
        records = [
            VideoRecord("a", "/x/a.mp4", FrameLabel.GLITCHY, GlitchType.CLIPPING, "demo"),
            VideoRecord("b", "/x/b.mp4", FrameLabel.CLEAN, None, "demo"),
            VideoRecord("c", "/x/c.mp4", None, None, "wild"),
        ]
        path = tmp_path / "dataset.jsonl"
        write_dataset_manifest(records, path)
        assert read_dataset_manifest(path) == records
        keys = list(json.loads(path.read_text().splitlines()[0]))
        assert keys == ["video_id", "path", "video_label", "glitch_type", "source_tag"]

    def test_glitch_type_requires_glitchy_label(self):
        with pytest.raises(ValueError):
            VideoRecord("a", "p", FrameLabel.CLEAN, GlitchType.FLOATING)
        with pytest.raises(ValueError):
            VideoRecord("a", "p", None, GlitchType.FLOATING)

    def test_duplicate_video_id_is_hard_error(self, tmp_path):
        path = tmp_path / "dataset.jsonl"
        write_dataset_manifest(
            [VideoRecord("a", "p1", None, None, ""), VideoRecord("a", "p2", None, None, "")], path
        )
        with pytest.raises(SchemaViolation, match="duplicate video_id"):
            read_dataset_manifest(path)


def test_video_verdict_round_trip():
    v = VideoVerdict("a", FrameLabel.GLITCHY, "lr-abc", 0.93)
    assert VideoVerdict.from_json_dict(v.to_json_dict()) == v
    plain = VideoVerdict("a", FrameLabel.CLEAN, "count_gt_3", None)
    assert VideoVerdict.from_json_dict(plain.to_json_dict()) == plain


def test_extraction_mode_validation():
    with pytest.raises(ValueError):
        ExtractionMode("FixedFps", None)
    with pytest.raises(ValueError):
        ExtractionMode("IFrames", 5.0)
    with pytest.raises(ValueError):
        ExtractionMode("Nonsense")
    assert ExtractionMode.from_json_dict(ExtractionMode.fixed_fps(5).to_json_dict()) == ExtractionMode.fixed_fps(5)
