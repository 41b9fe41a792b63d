"""Frame-sequence statistics and frame-to-video aggregation.

Two aggregator families map a video's predicted frame labels to one verdict:
count thresholds (glitchy iff more than k frames flagged) and a learned
logistic-regression model over five engineered sequence features, trained with
stratified out-of-fold threshold selection and shipped as a JSON model card.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import FrameLabel, PipelineError, SchemaViolation, VideoVerdict, sha256_hex
from .lr import Scaler, apply_scaler, fit_scaler, sigmoid, train_lr
from .rng import stable_generator


class EmptySequence(PipelineError):
    """A frame-label sequence with no frames has no statistics."""


class ClassTooSmall(PipelineError):
    """A class has fewer members than the number of folds."""


WINDOW_SIZES = (5, 10, 15, 20)

# Feature set consumed by the learned aggregator, in wire order.
FEATURE_NAMES = ("T", "frac", "max_run", "max_win_5", "run_density")

# Full candidate pool for correlation screening. Preference order puts the
# normalized statistics and the narrowest window first, so raw counts and
# wider windows are the ones dropped when a pair is redundant.
CANDIDATE_STATS = (
    "T",
    "frac",
    "max_run",
    "max_win_5",
    "run_density",
    "glitch_count",
    "max_win_10",
    "max_win_15",
    "max_win_20",
)

MODEL_CARD_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class SequenceStats:
    """Exact run/window statistics of one binary frame-label sequence."""

    T: int
    glitch_count: int
    frac: float
    max_run: int
    max_win: Mapping[int, int]  # window size -> max glitchy frames in any window
    run_count: int
    run_density: float

    def value(self, name: str) -> float:
        if name.startswith("max_win_"):
            return float(self.max_win[int(name.removeprefix("max_win_"))])
        return float(getattr(self, name))


def _as_bits(labels: Sequence) -> np.ndarray:
    values = [label.to_bool() if isinstance(label, FrameLabel) else bool(label) for label in labels]
    return np.asarray(values, dtype=np.int64)


def compute_stats(labels: Sequence) -> SequenceStats:
    """Enumerate run and sliding-window statistics exactly.

    ``max_win[W]`` scans every contiguous window of length min(W, T), so the
    statistic stays defined for sequences shorter than the window.
    """
    bits = _as_bits(labels)
    T = int(bits.size)
    if T == 0:
        raise EmptySequence("cannot compute statistics of an empty sequence")
    glitch_count = int(bits.sum())

    max_run = run_count = current = 0
    for value in bits:
        if value:
            current += 1
            if current == 1:
                run_count += 1
            max_run = max(max_run, current)
        else:
            current = 0

    prefix = np.concatenate([[0], np.cumsum(bits)])
    max_win = {}
    for window in WINDOW_SIZES:
        w = min(window, T)
        max_win[window] = int((prefix[w:] - prefix[:-w]).max())

    return SequenceStats(
        T=T,
        glitch_count=glitch_count,
        frac=glitch_count / T,
        max_run=max_run,
        max_win=max_win,
        run_count=run_count,
        run_density=run_count / T,
    )


def feature_vector(stats: SequenceStats) -> np.ndarray:
    return np.array([stats.value(name) for name in FEATURE_NAMES], dtype=float)


def feature_matrix(stats_rows: Sequence[SequenceStats]) -> np.ndarray:
    return np.vstack([feature_vector(s) for s in stats_rows])


def correlation_filter(
    stats_rows: Sequence[SequenceStats],
    threshold: float = 0.9,
    candidates: Sequence[str] = CANDIDATE_STATS,
) -> list[str]:
    """Greedy redundancy screen over the candidate statistics.

    For every pair with |Pearson r| above the threshold, the feature appearing
    later in the candidate order is dropped. Constant columns correlate with
    nothing (treated as r = 0) and are reported via a warning.
    """
    if len(stats_rows) < 3:
        raise ValueError("correlation screening needs at least 3 rows")
    matrix = np.array([[s.value(name) for name in candidates] for s in stats_rows], dtype=float)
    stds = matrix.std(axis=0)
    constant = [candidates[i] for i in np.flatnonzero(stds == 0.0)]
    if constant:
        warnings.warn(f"constant statistics treated as uncorrelated: {', '.join(constant)}")

    selected = list(candidates)
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            first, second = candidates[i], candidates[j]
            if first not in selected or second not in selected:
                continue
            if stds[i] == 0.0 or stds[j] == 0.0:
                continue
            r = np.corrcoef(matrix[:, i], matrix[:, j])[0, 1]
            if abs(r) > threshold:
                selected.remove(second)
    return selected


@dataclass(frozen=True)
class ThresholdRule:
    """Video is glitchy iff strictly more than k frames were flagged glitchy."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("count threshold must be >= 0")

    @property
    def aggregator_id(self) -> str:
        return f"count_gt_{self.k}"


def threshold_aggregate(labels: Sequence, rule: ThresholdRule, video_id: str) -> VideoVerdict:
    stats = compute_stats(labels)
    label = FrameLabel.GLITCHY if stats.glitch_count > rule.k else FrameLabel.CLEAN
    return VideoVerdict(video_id=video_id, label=label, aggregator_id=rule.aggregator_id, score=None)


@dataclass(frozen=True)
class LrHyperparams:
    C: float = 3.0
    max_iter: int = 500
    tol: float = 1e-6
    k_folds: int = 5
    seed: int = 0


@dataclass(frozen=True)
class AggregatorModel:
    """Trained scaler + LR weights + decision threshold, serializable as a model card."""

    feature_names: tuple[str, ...]
    scaler_means: tuple[float, ...]
    scaler_stds: tuple[float, ...]
    degenerate_features: tuple[str, ...]
    weights: tuple[float, ...]
    intercept: float
    threshold: float
    hyperparams: LrHyperparams
    converged: bool
    aggregator_id: str

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("decision threshold must lie in (0, 1)")
        if any(s <= 0 for s in self.scaler_stds):
            raise ValueError("scaler stds must be positive")
        if not len(self.feature_names) == len(self.weights) == len(self.scaler_means) == len(self.scaler_stds):
            raise ValueError("feature metadata lengths disagree")

    def scaler(self) -> Scaler:
        degenerate = tuple(self.feature_names.index(n) for n in self.degenerate_features)
        return Scaler(np.array(self.scaler_means), np.array(self.scaler_stds), degenerate)

    def to_json_dict(self) -> dict:
        return {
            "format_version": MODEL_CARD_FORMAT_VERSION,
            "aggregator_id": self.aggregator_id,
            "feature_names": list(self.feature_names),
            "scaler_means": list(self.scaler_means),
            "scaler_stds": list(self.scaler_stds),
            "degenerate_features": list(self.degenerate_features),
            "weights": list(self.weights),
            "intercept": self.intercept,
            "threshold": self.threshold,
            "converged": self.converged,
            "hyperparams": {
                "C": self.hyperparams.C,
                "max_iter": self.hyperparams.max_iter,
                "tol": self.hyperparams.tol,
                "k_folds": self.hyperparams.k_folds,
                "seed": self.hyperparams.seed,
            },
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "AggregatorModel":
        if doc.get("format_version") != MODEL_CARD_FORMAT_VERSION:
            raise SchemaViolation(f"unsupported model card version: {doc.get('format_version')!r}")
        hp = doc["hyperparams"]
        return cls(
            feature_names=tuple(doc["feature_names"]),
            scaler_means=tuple(doc["scaler_means"]),
            scaler_stds=tuple(doc["scaler_stds"]),
            degenerate_features=tuple(doc.get("degenerate_features", ())),
            weights=tuple(doc["weights"]),
            intercept=doc["intercept"],
            threshold=doc["threshold"],
            hyperparams=LrHyperparams(
                C=hp["C"], max_iter=hp["max_iter"], tol=hp["tol"], k_folds=hp["k_folds"], seed=hp["seed"]
            ),
            converged=doc.get("converged", True),
            aggregator_id=doc["aggregator_id"],
        )


def save_model_card(model: AggregatorModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_json_dict(), indent=2) + "\n", encoding="utf-8")


def load_model_card(path: str | Path) -> AggregatorModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"malformed model card: {exc.msg}", line=exc.lineno, path=path) from exc
    try:
        return AggregatorModel.from_json_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"invalid model card: {exc}", path=path) from exc


def cv_out_of_fold(
    X: np.ndarray,
    y01: np.ndarray,
    k: int = 5,
    seed: int = 0,
    C: float = 3.0,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> np.ndarray:
    """Stratified k-fold out-of-fold probabilities, deterministic in the seed.

    Fold assignment is per-class round-robin after a seeded shuffle; each
    fold's scaler and model are fit on that fold's training partition only, so
    every sample receives exactly one untouched-by-its-own-fit probability.
    """
    X = np.asarray(X, dtype=float)
    y01 = np.asarray(y01, dtype=float)
    if k < 2:
        raise ValueError("cross-validation needs k >= 2")
    folds = np.empty(len(y01), dtype=int)
    for cls in (0.0, 1.0):
        members = np.flatnonzero(y01 == cls)
        if len(members) < k:
            raise ClassTooSmall(f"class {int(cls)} has {len(members)} members, needs >= {k}")
        order = stable_generator("cvfolds", seed, int(cls)).permutation(members)
        folds[order] = np.arange(len(order)) % k
    probs = np.empty(len(y01), dtype=float)
    for fold in range(k):
        train = folds != fold
        scaler = fit_scaler(X[train])
        fit = train_lr(apply_scaler(X[train], scaler), y01[train], C=C, max_iter=max_iter, tol=tol)
        held = apply_scaler(X[~train], scaler)
        probs[~train] = sigmoid(held @ fit.weights + fit.intercept)
    return probs


def _f1_at(probs: np.ndarray, y01: np.ndarray, threshold: float) -> float:
    pred = probs > threshold
    truth = y01 == 1.0
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    denominator = 2 * tp + fp + fn
    return 2 * tp / denominator if denominator else 0.0


def select_threshold(probs: np.ndarray, y01: np.ndarray) -> float:
    """Pick the F1-maximizing decision threshold over out-of-fold probabilities.

    Candidates are the midpoints between consecutive distinct probabilities
    (padded with 0 and 1 so all-positive/all-negative decisions stay reachable)
    plus the 0.5 default; ties break toward the smallest threshold, favoring
    recall.
    """
    probs = np.asarray(probs, dtype=float)
    y01 = np.asarray(y01, dtype=float)
    if probs.shape != y01.shape or probs.size == 0:
        raise ValueError("probs and labels must be aligned and non-empty")
    distinct = np.unique(probs)
    padded = np.concatenate([[0.0], distinct, [1.0]])
    candidates = set((padded[:-1] + padded[1:]) / 2.0)
    candidates.add(0.5)
    best_threshold = 0.5
    best_f1 = -1.0
    for threshold in sorted(c for c in candidates if 0.0 < c < 1.0):
        f1 = _f1_at(probs, y01, threshold)
        if f1 > best_f1:
            best_f1, best_threshold = f1, threshold
    return float(best_threshold)


def train_aggregator(
    X: np.ndarray,
    y01: np.ndarray,
    hyperparams: LrHyperparams = LrHyperparams(),
    feature_names: Sequence[str] = FEATURE_NAMES,
) -> AggregatorModel:
    """Full training protocol: out-of-fold threshold selection, then a final
    scaler + model fit on the entire training set, packaged as a model card."""
    hp = hyperparams
    oof = cv_out_of_fold(X, y01, k=hp.k_folds, seed=hp.seed, C=hp.C, max_iter=hp.max_iter, tol=hp.tol)
    threshold = select_threshold(oof, y01)
    scaler = fit_scaler(X)
    fit = train_lr(apply_scaler(X, scaler), y01, C=hp.C, max_iter=hp.max_iter, tol=hp.tol)
    names = tuple(feature_names)
    partial = AggregatorModel(
        feature_names=names,
        scaler_means=tuple(float(v) for v in scaler.means),
        scaler_stds=tuple(float(v) for v in scaler.stds),
        degenerate_features=tuple(names[i] for i in scaler.degenerate),
        weights=tuple(float(v) for v in fit.weights),
        intercept=fit.intercept,
        threshold=threshold,
        hyperparams=hp,
        converged=fit.converged,
        aggregator_id="",
    )
    card = partial.to_json_dict()
    del card["aggregator_id"]
    digest = sha256_hex(json.dumps(card, sort_keys=True))
    return replace(partial, aggregator_id=f"lr-{digest[:12]}")


def predict_video(model: AggregatorModel, labels: Sequence, video_id: str) -> VideoVerdict:
    """Score one video's frame-label sequence with a trained model card."""
    stats = compute_stats(labels)
    x = np.array([stats.value(name) for name in model.feature_names], dtype=float)
    z = float(apply_scaler(x[None, :], model.scaler())[0] @ np.array(model.weights) + model.intercept)
    score = float(sigmoid(np.array([z]))[0])
    label = FrameLabel.GLITCHY if score > model.threshold else FrameLabel.CLEAN
    return VideoVerdict(video_id=video_id, label=label, aggregator_id=model.aggregator_id, score=score)


def write_features_csv(
    path: str | Path,
    rows: Iterable[tuple[str, SequenceStats, FrameLabel | None]],
) -> None:
    """Dump per-video features for external analysis (label: 1 glitchy, 0 clean)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", *FEATURE_NAMES, "label"])
        for video_id, stats, label in rows:
            writer.writerow(
                [
                    video_id,
                    *(format(stats.value(name), "g") for name in FEATURE_NAMES),
                    "" if label is None else int(label.to_bool()),
                ]
            )
