"""Repeated-run comparison of two settings with a paired t-test.

The protocol: produce one set of frame predictions per setting, then repeat
the aggregator training five times over matched seeds (each seed draws a
fresh 100+100-video training subset and cross-validation split). Per-run
video-level scores are compared with a paired Student t-test at p < 0.05
(sample standard deviation, df = runs - 1; the p-value comes from the
in-repo regularized incomplete beta routine, no external stats dependency).
"""

import numpy as np

from glitchtriage import (
    LrHyperparams,
    PatternSpec,
    ReferencePolicy,
    gen_corpus,
    paired_t_test,
    predict_video,
    train_aggregator,
)
from glitchtriage.aggregate import compute_stats, feature_matrix
from glitchtriage.backends import SimulatedBackend
from glitchtriage.core import FrameLabel
from glitchtriage.evaluation import evaluate_videos, frame_labels_by_video
from glitchtriage.prompting import REALWORLD9
from glitchtriage.rng import stable_generator
from glitchtriage.sequencer import process_video

SETTINGS = {
    "with-reference": (0.76, 0.2956, ReferencePolicy.last_clean_frame()),
    "no-reference": (0.28, 0.038, ReferencePolicy.no_ref()),
}
SEEDS = (1, 2, 3, 4, 5)
TRAIN_PER_CLASS = 100


def frame_predictions(corpus, tpr, fpr, policy):
    backend = SimulatedBackend(tpr, fpr, seed=1, truth=corpus.truth)
    predictions = []
    for manifest in corpus.manifests:
        predictions.extend(process_video(manifest, policy, backend, REALWORLD9))
    return frame_labels_by_video(predictions)


def one_training_run(corpus, labels, seed):
    truth = {r.video_id: r.video_label for r in corpus.records}
    glitchy = sorted(v for v in labels if truth[v] is FrameLabel.GLITCHY)
    clean = sorted(v for v in labels if truth[v] is FrameLabel.CLEAN)
    rng = stable_generator("trainsplit", seed)
    train_ids = sorted(glitchy[i] for i in rng.permutation(len(glitchy))[:TRAIN_PER_CLASS])
    train_ids += sorted(clean[i] for i in rng.permutation(len(clean))[:TRAIN_PER_CLASS])
    X = feature_matrix([compute_stats(labels[v]) for v in train_ids])
    y = np.array([1.0] * TRAIN_PER_CLASS + [0.0] * TRAIN_PER_CLASS)
    model = train_aggregator(X, y, LrHyperparams(seed=seed))
    test_ids = sorted(set(labels) - set(train_ids))
    verdicts = [predict_video(model, labels[v], v) for v in test_ids]
    records = [r for r in corpus.records if r.video_id in set(test_ids)]
    report = evaluate_videos(verdicts, records).overall
    return report.accuracy, report.f1


def main() -> None:
    corpus = gen_corpus(500, 500, PatternSpec(duration_frames=(8, 16), tail_clean_frames=(2, 4), seed=0))
    scores = {}
    for name, (tpr, fpr, policy) in SETTINGS.items():
        labels = frame_predictions(corpus, tpr, fpr, policy)
        accs, f1s = [], []
        for seed in SEEDS:
            accuracy, f1 = one_training_run(corpus, labels, seed)
            accs.append(accuracy)
            f1s.append(f1)
        scores[name] = {"accuracy": accs, "f1": f1s}
        print(f"{name:<16} accuracy per run: {[f'{a:.3f}' for a in accs]}  mean {np.mean(accs):.3f}")
        print(f"{'':<16} f1 per run:       {[f'{a:.3f}' for a in f1s]}  mean {np.mean(f1s):.3f}")

    print("\nPaired t-tests over the five matched runs (p < 0.05 -> significant):")
    for metric in ("accuracy", "f1"):
        result = paired_t_test(scores["with-reference"][metric], scores["no-reference"][metric])
        verdict = "significant" if result.significant_at_0_05 else "not significant"
        print(f"  {metric:<9} t = {result.t_stat:+.3f}  df = {result.df}  p = {result.p_two_sided:.4g}  ({verdict})")


if __name__ == "__main__":
    main()
