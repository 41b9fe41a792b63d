"""Prompt templates, glitch-category catalogs, and robust verdict parsing.

Three templates ship as text assets with a sidecar digest file: a single-frame
prompt, a pair prompt framing the first image as a known bug-free reference,
and a pair variant whose first sentence instead declares the reference a known
glitchy image (that variant derives from the clean-pair template by swapping
the reference framing; the rest of the wording is shared). Templates carry one
``{categories}`` slot filled by :func:`render_prompt`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .core import FrameLabel, ParseStatus, PipelineError, PromptKind, sha256_hex

_TEMPLATE_FILES = {
    PromptKind.SINGLE_FRAME: "single_frame.txt",
    PromptKind.PAIR_CLEAN_REF: "pair_clean_ref.txt",
    PromptKind.PAIR_GLITCHY_REF: "pair_glitchy_ref.txt",
}
_CATEGORY_SLOT = "{categories}"


@dataclass(frozen=True)
class CategorySet:
    """Named, ordered list of (title, definition) glitch categories."""

    name: str
    categories: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.categories:
            raise ValueError("a category set must contain at least one category")

    def render(self) -> str:
        return "\n\n".join(
            f"{i}. {title} - {definition}" for i, (title, definition) in enumerate(self.categories, start=1)
        )


REFGLITCH5 = CategorySet(
    name="refglitch5",
    categories=(
        ("Missing object", "parts of the character or object are unexpectedly missing."),
        (
            "Clipping",
            "a character or object visibly intersects or passes through another solid surface, "
            "or geometry overlaps in a way that could not occur with correct depth/occlusion.",
        ),
        (
            "Floating",
            "a character or object is visibly not in contact with the ground or surface it should "
            "be resting on, defying expected physics or gravity.",
        ),
        ("Corrupted texture", "a surface shows clearly broken or incorrect texturing."),
        ("Lighting issue", "the scene lighting is clearly wrong and not explainable by natural scene change."),
    ),
)

REALWORLD9 = CategorySet(
    name="realworld9",
    categories=(
        (
            "Clipping into Environment",
            "Parts of the character or object are intersecting with solid objects like walls, "
            "floors, trees, or furniture.",
        ),
        (
            "Floating Without Support",
            "Characters or objects are visibly suspended in mid-air or hovering above surfaces "
            "with no physical contact or support.",
        ),
        (
            "Deformed or Broken Model",
            "Character models are in default poses (e.g., T-pose), unnaturally stretched, or "
            "otherwise malformed.",
        ),
        (
            "Overlapping or Intersecting Characters",
            "Multiple characters occupy the same space, overlapping or clipping into each other.",
        ),
        (
            "Rendering / Texture / Visual Artifacts",
            "Visual content fails to render correctly, causing missing textures, transparency "
            "issues, or broken models.",
        ),
        (
            "Animation or Pose Errors",
            "Characters are in inappropriate or frozen animations, not matching their context "
            "(e.g., giving a thumbs up when holding a gun).",
        ),
        (
            "Physics Glitches / Object Instability",
            "Objects behave unrealistically, often flipping, tilting, or becoming unstable in "
            "ways that break immersion.",
        ),
        (
            "Gameplay / Logic Errors",
            "Problems with in-game logic, rules, or asset assignments that break intended behavior.",
        ),
        (
            "UI / Interaction Anomalies",
            "Issues where user interface elements, HUD prompts, icons, or interaction mechanics "
            "behave incorrectly.",
        ),
    ),
)

_BUILTIN_CATEGORY_SETS = {cs.name: cs for cs in (REFGLITCH5, REALWORLD9)}


def get_category_set(name: str) -> CategorySet:
    try:
        return _BUILTIN_CATEGORY_SETS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTIN_CATEGORY_SETS))
        raise PipelineError(f"unknown category set {name!r} (built-ins: {known})") from None


@lru_cache(maxsize=None)
def template_text(kind: PromptKind) -> str:
    return resources.files(__package__).joinpath("prompts", _TEMPLATE_FILES[kind]).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def render_prompt(kind: PromptKind, cats: CategorySet) -> str:
    """Fill the template for ``kind`` with the category list; stable across runs."""
    text = template_text(kind)
    assert _CATEGORY_SLOT in text, f"template for {kind} lost its category slot"
    return text.replace(_CATEGORY_SLOT, cats.render()).rstrip("\n")


def verify_template_digests() -> dict[str, str]:
    """Recompute template digests and compare them to the shipped sidecar file.

    Returns the name -> digest map on success; raises if any template was edited
    without regenerating the sidecar.
    """
    root = resources.files(__package__).joinpath("prompts")
    pinned: dict[str, str] = {}
    for line in root.joinpath("digests.sha256").read_text(encoding="utf-8").splitlines():
        if line.strip():
            digest, name = line.split()
            pinned[name] = digest
    for name in _TEMPLATE_FILES.values():
        actual = sha256_hex(root.joinpath(name).read_bytes())
        if pinned.get(name) != actual:
            raise PipelineError(f"prompt template {name} does not match its pinned digest")
    return pinned


@dataclass(frozen=True)
class VerdictResponse:
    """Parsed model verdict; ``parse_status`` records how it was obtained."""

    reasoning: str
    glitch_detected: bool
    parse_status: ParseStatus


_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_-]+)?\s*\n(.*?)```", re.DOTALL)


def _coerce_verdict(obj: object) -> tuple[str, bool] | None:
    if not isinstance(obj, dict) or "glitch_detected" not in obj:
        return None
    raw = obj["glitch_detected"]
    if isinstance(raw, bool):
        detected = raw
    elif isinstance(raw, str) and raw.strip().lower() in ("true", "false"):
        detected = raw.strip().lower() == "true"
    else:
        return None
    reasoning = obj.get("reasoning", "")
    return (reasoning if isinstance(reasoning, str) else str(reasoning)), detected


def _scan_embedded_objects(text: str):
    decoder = json.JSONDecoder()
    idx = text.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(text, idx)
        except json.JSONDecodeError:
            pass
        else:
            yield obj
        idx = text.find("{", idx + 1)


def parse_verdict(raw: str, default_on_fail: FrameLabel = FrameLabel.CLEAN) -> VerdictResponse:
    """Extract the first JSON verdict object from a raw model response.

    A response that is exactly the requested JSON parses with status Ok. A
    verdict found inside markdown code fences or embedded in surrounding prose
    parses with status Recovered. When no verdict object can be extracted the
    status is Failed, the reasoning is empty, and the label falls back to
    ``default_on_fail``.
    """
    try:
        direct = json.loads(raw.strip())
    except (json.JSONDecodeError, TypeError):
        direct = None
    verdict = _coerce_verdict(direct)
    if verdict is not None:
        return VerdictResponse(verdict[0], verdict[1], ParseStatus.OK)

    candidates = []
    for fenced in _FENCE_RE.finditer(raw):
        candidates.extend(_scan_embedded_objects(fenced.group(1)))
    candidates.extend(_scan_embedded_objects(raw))
    for obj in candidates:
        verdict = _coerce_verdict(obj)
        if verdict is not None:
            return VerdictResponse(verdict[0], verdict[1], ParseStatus.RECOVERED)

    return VerdictResponse("", default_on_fail.to_bool(), ParseStatus.FAILED)
