"""Reference-guided glitch detection for gameplay videos.

A three-stage pipeline: extract keyframes from a video, judge each frame with
a vision-language model prompted against a reference frame chosen from earlier
in the same video, then aggregate the noisy frame verdicts into one video-level
triage decision. Model backends are pluggable; a deterministic simulator and a
response replay cache make every algorithmic stage testable without live model
access.
"""

__version__ = "0.1.0"

from .aggregate import (
    AggregatorModel,
    LrHyperparams,
    SequenceStats,
    ThresholdRule,
    compute_stats,
    correlation_filter,
    cv_out_of_fold,
    feature_vector,
    predict_video,
    select_threshold,
    threshold_aggregate,
    train_aggregator,
)
from .backends import BackendSpec, HttpChatBackend, QueryContext, ReplayBackend, SimulatedBackend
from .core import (
    ExtractionMode,
    FrameLabel,
    FramePrediction,
    GlitchType,
    Keyframe,
    KeyframeManifest,
    ParseStatus,
    PipelineError,
    PromptKind,
    VideoRecord,
    VideoVerdict,
    validate_prediction_log,
)
from .evaluation import (
    ConfusionCounts,
    MetricsReport,
    PairedTestResult,
    confusion,
    evaluate_frames,
    evaluate_videos,
    metrics,
    paired_t_test,
)
from .keyframes import ExtractionConfig, ImageFormat, extract_keyframes, load_manifest, write_manifest
from .lr import fit_scaler, irls_fit, lr_objective, train_lr
from .prompting import REALWORLD9, REFGLITCH5, CategorySet, VerdictResponse, parse_verdict, render_prompt
from .sequencer import PolicyKind, ReferencePolicy, ReferencePool, process_video, select_reference
from .synth import Corpus, PatternSpec, gen_corpus, gen_truth_sequence

__all__ = [name for name in dir() if not name.startswith("_")]
