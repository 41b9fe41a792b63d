"""Generate a synthetic gameplay corpus and inspect its temporal glitch pattern.

Every glitchy clip follows the same staged shape: it starts clean, a glitch
switches on about a third of the way through, stays active for a contiguous
span, and the clip ends clean again. Clean clips are the all-clean variant of
the same duration distribution. Nothing is rendered; a corpus is only label
streams, a dataset manifest, and placeholder keyframe manifests, which is all
the simulated model backend needs.
"""

from collections import Counter

from glitchtriage import FrameLabel, PatternSpec, gen_corpus
from glitchtriage.synth import gen_truth_sequence


def bar(labels) -> str:
    return "".join("#" if label is FrameLabel.GLITCHY else "." for label in labels)


def main() -> None:
    spec = PatternSpec(duration_frames=(25, 90), tail_clean_frames=(5, 15), seed=7)

    print("Ten glitchy truth sequences ('#' = glitchy frame, '.' = clean):\n")
    for index in range(10):
        labels = gen_truth_sequence(spec, index)
        onset = labels.index(FrameLabel.GLITCHY) + 1
        print(f"  video {index:02d}  T={len(labels):3d}  onset at t={onset:3d}  {bar(labels)}")

    print("\nA balanced 50+50 corpus with round-robin glitch types:")
    corpus = gen_corpus(50, 50, spec)
    counts = Counter(r.glitch_type.value for r in corpus.records if r.glitch_type)
    for gtype, count in sorted(counts.items()):
        print(f"  {gtype:<18} {count} videos")
    total_frames = len(corpus.truth)
    glitchy_frames = sum(1 for label in corpus.truth.values() if label is FrameLabel.GLITCHY)
    print(f"\n  {len(corpus.records)} videos, {total_frames} frames, "
          f"{glitchy_frames / total_frames:.1%} of frames glitchy")
    print("  (same spec + seed always regenerates this corpus byte-for-byte)")


if __name__ == "__main__":
    main()
