"""Show the shipped prompt templates and exercise the verdict parser.

Three templates cover the prompting modes: a single-frame prompt for the
first keyframe (the reference pool is still empty), a pair prompt that frames
the first image as a known bug-free reference, and a pair variant warning
that the reference itself is glitchy. Each carries a glitch-category catalog:
nine broad real-world categories, or the five controlled-corpus types.

Model responses are parsed defensively: exact JSON, JSON inside markdown
fences, and JSON buried in prose all yield a verdict (the latter two marked
Recovered); anything else fails closed onto a configurable default label.
"""

from glitchtriage import FrameLabel, PromptKind, parse_verdict, render_prompt
from glitchtriage.prompting import REALWORLD9, REFGLITCH5

RESPONSES = [
    '{"reasoning": "left arm missing vs reference", "glitch_detected": true}',
    '```json\n{"reasoning": "crate texture scrambled", "glitch_detected": true}\n```',
    'Sure, here is the result: {"reasoning": "scene matches", "glitch_detected": false} Let me know!',
    "The image looks perfectly normal to me.",
]


def main() -> None:
    print("=" * 72)
    print("Pair prompt, clean reference, five controlled glitch types:")
    print("=" * 72)
    print(render_prompt(PromptKind.PAIR_CLEAN_REF, REFGLITCH5))

    print()
    print("=" * 72)
    print("Glitchy-reference variant differs only in the reference framing:")
    print("=" * 72)
    clean = render_prompt(PromptKind.PAIR_CLEAN_REF, REALWORLD9).splitlines()
    glitchy = render_prompt(PromptKind.PAIR_GLITCHY_REF, REALWORLD9).splitlines()
    for before, after in zip(clean, glitchy):
        if before != after:
            print(f"  clean pair   | {before}")
            print(f"  glitchy pair | {after}")

    print()
    print("=" * 72)
    print("Verdict parsing (default label on failure: clean):")
    print("=" * 72)
    for raw in RESPONSES:
        verdict = parse_verdict(raw, default_on_fail=FrameLabel.CLEAN)
        shown = raw if len(raw) <= 64 else raw[:61] + "..."
        print(f"  {verdict.parse_status.value:<9} glitchy={str(verdict.glitch_detected):<5}  <- {shown!r}")


if __name__ == "__main__":
    main()
