"""Classification metrics, paired significance testing, and report assembly.

Glitchy is the positive class throughout. The paired t-test's p-value is
computed in-repo from the regularized incomplete beta function (continued
fraction), so the evaluation stack carries no external math dependency.
Reports serialize to JSON with CSV mirrors; nothing here renders plots.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .core import (
    FrameLabel,
    FramePrediction,
    GlitchType,
    ParseStatus,
    PipelineError,
    VideoRecord,
    VideoVerdict,
    dumps_json_line,
    group_predictions_by_video,
)

EXPECTED_RUNS = 5  # repeated-run protocol; comparisons assert this unless overridden


class LengthMismatch(PipelineError):
    """Prediction and truth sequences have different lengths."""


class MissingTruth(PipelineError):
    """A prediction has no ground-truth label to score against."""


class EmptyEvaluation(PipelineError):
    """No overlapping items between predictions and truth."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: Sequence[FrameLabel], truth: Sequence[FrameLabel | None]) -> ConfusionCounts:
    """Exact confusion counts over aligned label sequences (glitchy = positive)."""
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} truth labels")
    tp = fp = fn = tn = 0
    for index, (p, t) in enumerate(zip(pred, truth)):
        if t is None:
            raise MissingTruth(f"no truth label at position {index}")
        if p is FrameLabel.GLITCHY:
            if t is FrameLabel.GLITCHY:
                tp += 1
            else:
                fp += 1
        elif t is FrameLabel.GLITCHY:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    f1: float
    precision: float
    recall: float
    n: int
    setting_id: str = ""
    flags: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        out = {
            "setting_id": self.setting_id,
            "n": self.n,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def metrics(counts: ConfusionCounts, setting_id: str = "") -> MetricsReport:
    """Standard accuracy/F1/precision/recall; zero-denominator cases score 0, flagged."""
    if counts.total == 0:
        raise EmptyEvaluation("no items to evaluate")
    flags: list[str] = []
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 0.0
        flags.append("precision_undefined")
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall = 0.0
        flags.append("recall_undefined")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = (counts.tp + counts.tn) / counts.total
    return MetricsReport(
        accuracy=accuracy,
        f1=f1,
        precision=precision,
        recall=recall,
        n=counts.total,
        setting_id=setting_id,
        flags=tuple(flags),
    )


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, accurate to ~1e-13 absolute."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """Two-sided p-value of the Student-t distribution with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class PairedTestResult:
    t_stat: float
    df: int
    p_two_sided: float
    n_runs: int
    significant_at_0_05: bool
    flags: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        out = {
            "t": self.t_stat,
            "df": self.df,
            "p": self.p_two_sided,
            "n_runs": self.n_runs,
            "significant": self.significant_at_0_05,
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> PairedTestResult:
    """Paired Student t-test over matched per-run scores (sample sd, df = n-1).

    All-zero differences report t = 0, p = 1 with a degenerate flag; identical
    non-zero differences (sd = 0) report p = 0 with an infinite statistic.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} runs")
    n = len(a)
    if n < 2:
        raise ValueError("paired test needs at least two runs")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    sd = math.sqrt(sum((d - mean) ** 2 for d in diffs) / (n - 1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return PairedTestResult(0.0, df, 1.0, n, False, flags=("degenerate_differences",))
        t = math.copysign(math.inf, mean)
        return PairedTestResult(t, df, 0.0, n, True, flags=("zero_variance",))
    t = mean / (sd / math.sqrt(n))
    p = student_t_two_sided_p(t, df)
    return PairedTestResult(t, df, p, n, p < 0.05)


@dataclass(frozen=True)
class EvaluationReport:
    """Overall metrics plus optional per-category breakdown for one setting."""

    level: str  # "Frame" | "Video"
    overall: MetricsReport
    per_category: Mapping[str, MetricsReport] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {"level": self.level, **self.overall.to_json_dict()}
        if self.per_category:
            out["per_category"] = {name: r.to_json_dict() for name, r in self.per_category.items()}
        return out


GLITCH_FREE_CATEGORY = "GlitchFree"


def _category_reports(
    items: Sequence[tuple[FrameLabel, FrameLabel, GlitchType | None]],
    setting_id: str,
) -> dict[str, MetricsReport]:
    """Per-category metrics: each glitch type scores its own positives plus the
    shared pool of truth-clean items; the glitch-free report is that pool alone."""
    reports: dict[str, MetricsReport] = {}
    clean_pool = [(p, t) for p, t, _ in items if t is FrameLabel.CLEAN]
    for gtype in GlitchType:
        positives = [(p, t) for p, t, g in items if t is FrameLabel.GLITCHY and g is gtype]
        if not positives:
            continue
        pairs = positives + clean_pool
        counts = confusion([p for p, _ in pairs], [t for _, t in pairs])
        reports[gtype.value] = metrics(counts, setting_id=f"{setting_id}/{gtype.value}")
    if clean_pool:
        counts = confusion([p for p, _ in clean_pool], [t for _, t in clean_pool])
        reports[GLITCH_FREE_CATEGORY] = metrics(counts, setting_id=f"{setting_id}/{GLITCH_FREE_CATEGORY}")
    return reports


def evaluate_frames(
    predictions: Sequence[FramePrediction],
    frame_truth: Mapping[tuple[str, int], FrameLabel],
    *,
    setting_id: str = "",
    include_failed: bool = False,
    records: Sequence[VideoRecord] | None = None,
    by_category: bool = False,
) -> EvaluationReport:
    """Score frame predictions against per-frame ground truth.

    Failed-parse frames are excluded from frame metrics unless
    ``include_failed`` is set (they still carry their defaulted label). Frames
    without truth are skipped; an empty intersection is an error.
    """
    type_by_video: dict[str, GlitchType | None] = {}
    if records is not None:
        type_by_video = {r.video_id: r.glitch_type for r in records}
    items: list[tuple[FrameLabel, FrameLabel, GlitchType | None]] = []
    for pred in predictions:
        if not include_failed and pred.parse_status is ParseStatus.FAILED:
            continue
        truth = frame_truth.get((pred.video_id, pred.frame_index))
        if truth is None:
            continue
        items.append((pred.label, truth, type_by_video.get(pred.video_id)))
    if not items:
        raise EmptyEvaluation("no frames with both a prediction and a truth label")
    counts = confusion([p for p, _, _ in items], [t for _, t, _ in items])
    overall = metrics(counts, setting_id=setting_id)
    per_category = _category_reports(items, setting_id) if by_category else {}
    return EvaluationReport(level="Frame", overall=overall, per_category=per_category)


def evaluate_videos(
    verdicts: Sequence[VideoVerdict],
    records: Sequence[VideoRecord],
    *,
    setting_id: str = "",
    by_category: bool = False,
) -> EvaluationReport:
    """Score video verdicts against the dataset manifest's video labels."""
    truth_by_video = {r.video_id: r.video_label for r in records if r.video_label is not None}
    type_by_video = {r.video_id: r.glitch_type for r in records}
    items: list[tuple[FrameLabel, FrameLabel, GlitchType | None]] = []
    for verdict in verdicts:
        truth = truth_by_video.get(verdict.video_id)
        if truth is None:
            continue
        items.append((verdict.label, truth, type_by_video.get(verdict.video_id)))
    if not items:
        raise EmptyEvaluation("no videos with both a verdict and a truth label")
    counts = confusion([p for p, _, _ in items], [t for _, t, _ in items])
    overall = metrics(counts, setting_id=setting_id)
    per_category = _category_reports(items, setting_id) if by_category else {}
    return EvaluationReport(level="Video", overall=overall, per_category=per_category)


def frame_labels_by_video(
    predictions: Sequence[FramePrediction],
    *,
    include_failed: bool = True,
) -> dict[str, list[FrameLabel]]:
    """Ordered per-video label sequences for aggregation.

    Unlike frame metrics, aggregation includes Failed frames by default: every
    frame carries a label either way, and sequence features assume gap-free
    sequences.
    """
    out: dict[str, list[FrameLabel]] = {}
    for video_id, preds in group_predictions_by_video(predictions).items():
        labels = [
            p.label for p in preds if include_failed or p.parse_status is not ParseStatus.FAILED
        ]
        if labels:
            out[video_id] = labels
    return out


def write_report_json(report: EvaluationReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8")


def write_report_csv(report: EvaluationReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "setting_id", "level", "n", "accuracy", "f1", "precision", "recall"])
        rows = [("overall", report.overall)] + sorted(report.per_category.items())
        for name, rep in rows:
            writer.writerow(
                [name, rep.setting_id, report.level, rep.n, rep.accuracy, rep.f1, rep.precision, rep.recall]
            )


def write_comparison_json(
    path: str | Path,
    *,
    setting_a: str,
    setting_b: str,
    results_by_metric: Mapping[str, PairedTestResult],
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for metric_name, result in results_by_metric.items():
        rows.append(
            {
                "setting_a": setting_a,
                "setting_b": setting_b,
                "metric": metric_name,
                **result.to_json_dict(),
            }
        )
    path.write_text("\n".join(dumps_json_line(r) for r in rows) + "\n", encoding="utf-8")
