"""Compare reference selection policies at the frame level.

The sequential loop keeps a per-video pool of already-judged frames with their
predicted labels. For each new test frame a policy picks the reference:
the most recent predicted-clean frame, the immediately preceding frame, a
random earlier frame, or none at all. Here a simulated model stands in for a
real one: frames are judged correctly at a configured true-positive rate and
false alarms appear at a false-positive rate, so policies can be compared
without any live model. The rates differ per policy to mirror how much a
well-matched reference helps a real model; the point of the demo is the
mechanics of pool bookkeeping and the evaluation surface.
"""

from glitchtriage import PatternSpec, ReferencePolicy, gen_corpus
from glitchtriage.backends import SimulatedBackend
from glitchtriage.evaluation import evaluate_frames
from glitchtriage.prompting import REALWORLD9
from glitchtriage.sequencer import process_video

POLICIES = {
    "LastCleanFrame": (ReferencePolicy.last_clean_frame(), 0.69, 0.2957),
    "PreviousFrame": (ReferencePolicy.previous_frame(), 0.51, 0.2869),
    "RandomFrame": (ReferencePolicy.random_frame(seed=4), 0.63, 0.2965),
    "NoRef": (ReferencePolicy.no_ref(), 0.28, 0.0382),
}


def main() -> None:
    corpus = gen_corpus(60, 60, PatternSpec(duration_frames=(10, 24), tail_clean_frames=(2, 6), seed=3))

    print("Frame-level scores per reference policy (simulated model):\n")
    print(f"  {'policy':<16} {'accuracy':>9} {'f1':>7} {'precision':>10} {'recall':>7}")
    for name, (policy, tpr, fpr) in POLICIES.items():
        backend = SimulatedBackend(tpr=tpr, fpr=fpr, seed=1, truth=corpus.truth)
        predictions = []
        for manifest in corpus.manifests:
            predictions.extend(process_video(manifest, policy, backend, REALWORLD9))
        report = evaluate_frames(predictions, corpus.truth, setting_id=name).overall
        print(f"  {name:<16} {report.accuracy:>9.3f} {report.f1:>7.3f} "
              f"{report.precision:>10.3f} {report.recall:>7.3f}")

    print("\nPrompt kinds chosen by LastCleanFrame on one video:")
    policy, tpr, fpr = POLICIES["LastCleanFrame"]
    backend = SimulatedBackend(tpr=tpr, fpr=fpr, seed=1, truth=corpus.truth)
    predictions = process_video(corpus.manifests[0], policy, backend, REALWORLD9)
    for p in predictions:
        ref = "-" if p.reference_index is None else f"ref t={p.reference_index}"
        print(f"  t={p.frame_index:>2}  {p.prompt_kind.value:<15} {ref:<10} -> "
              f"{'glitchy' if p.label.to_bool() else 'clean'}")


if __name__ == "__main__":
    main()
