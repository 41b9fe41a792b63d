"""Train the learned video-level aggregator and compare it with count rules.

A video's frame verdicts collapse into five sequence features: length, the
fraction of glitchy frames, the longest glitchy run, the best 5-frame window,
and the density of distinct glitchy segments. A small labeled subset trains a
regularized logistic regression on those features; the decision threshold is
picked to maximize F1 over stratified out-of-fold probabilities, then the
model is refit on the full subset and shipped as a JSON model card.
"""

import numpy as np

from glitchtriage import (
    LrHyperparams,
    PatternSpec,
    ReferencePolicy,
    ThresholdRule,
    compute_stats,
    correlation_filter,
    gen_corpus,
    predict_video,
    threshold_aggregate,
    train_aggregator,
)
from glitchtriage.aggregate import feature_matrix
from glitchtriage.backends import SimulatedBackend
from glitchtriage.evaluation import evaluate_videos, frame_labels_by_video
from glitchtriage.core import FrameLabel
from glitchtriage.prompting import REALWORLD9
from glitchtriage.rng import stable_generator
from glitchtriage.sequencer import process_video


def main() -> None:
    corpus = gen_corpus(150, 150, PatternSpec(duration_frames=(8, 16), tail_clean_frames=(2, 4), seed=0))
    backend = SimulatedBackend(tpr=0.76, fpr=0.2956, seed=1, truth=corpus.truth)
    predictions = []
    for manifest in corpus.manifests:
        predictions.extend(process_video(manifest, ReferencePolicy.last_clean_frame(), backend, REALWORLD9))
    labels = frame_labels_by_video(predictions)

    print("Correlation screen over the candidate statistics (|r| > 0.9):")
    stats_rows = [compute_stats(seq) for seq in labels.values()]
    print(f"  retained: {', '.join(correlation_filter(stats_rows, threshold=0.9))}\n")

    truth = {r.video_id: r.video_label for r in corpus.records}
    glitchy_ids = sorted(v for v in labels if truth[v] is FrameLabel.GLITCHY)
    clean_ids = sorted(v for v in labels if truth[v] is FrameLabel.CLEAN)
    rng = stable_generator("demo-split", 0)
    train_ids = sorted(glitchy_ids[i] for i in rng.permutation(len(glitchy_ids))[:50])
    train_ids += sorted(clean_ids[i] for i in rng.permutation(len(clean_ids))[:50])
    test_ids = sorted(set(labels) - set(train_ids))

    X = feature_matrix([compute_stats(labels[v]) for v in train_ids])
    y = np.array([1.0] * 50 + [0.0] * 50)
    model = train_aggregator(X, y, LrHyperparams(seed=0))
    print("Trained model card:")
    for name, weight in zip(model.feature_names, model.weights):
        print(f"  {name:<12} weight {weight:+.3f}")
    print(f"  intercept    {model.intercept:+.3f}")
    print(f"  threshold    {model.threshold:.4f}  (picked on out-of-fold F1)\n")

    test_records = [r for r in corpus.records if r.video_id in set(test_ids)]
    print(f"Held-out video triage over {len(test_ids)} videos:")
    print(f"  {'aggregator':<14} {'accuracy':>9} {'f1':>7} {'precision':>10} {'recall':>7}")
    verdicts = [predict_video(model, labels[v], v) for v in test_ids]
    report = evaluate_videos(verdicts, test_records).overall
    print(f"  {'learned LR':<14} {report.accuracy:>9.3f} {report.f1:>7.3f} "
          f"{report.precision:>10.3f} {report.recall:>7.3f}")
    for k in (1, 3, 5):
        verdicts = [threshold_aggregate(labels[v], ThresholdRule(k), v) for v in test_ids]
        report = evaluate_videos(verdicts, test_records).overall
        print(f"  {'count > ' + str(k):<14} {report.accuracy:>9.3f} {report.f1:>7.3f} "
              f"{report.precision:>10.3f} {report.recall:>7.3f}")


if __name__ == "__main__":
    main()
