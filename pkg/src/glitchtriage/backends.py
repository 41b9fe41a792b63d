"""Model backends: a live OpenAI-compatible HTTP client, a response replay
cache, and a deterministic truth-conditioned simulator.

All backends expose the same ``query(prompt, images, ctx)`` surface and are
safe to share between concurrent workers: the simulator derives every draw
from its context, replay cache writes are write-temp-then-rename, and the HTTP
client is stateless per request.
"""

from __future__ import annotations

import base64
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .core import FrameLabel, PipelineError, PromptKind, dumps_json_line, sha256_hex
from .rng import stable_uniform


class BackendError(PipelineError):
    """Base class for backend failures."""


class AuthMissing(BackendError):
    """The configured API-key environment variable is not set."""


class TransportExhausted(BackendError):
    """All retries failed; carries the last transport error."""


class CacheMiss(BackendError):
    """Replay backend found no cached response for this request (strict mode)."""


class TruthMissing(BackendError):
    """The simulated backend has no ground-truth label for this frame."""


@dataclass(frozen=True)
class QueryContext:
    """Identifies one model call: which frame of which video, under which prompt."""

    video_id: str
    frame_index: int
    prompt_kind: PromptKind


class ModelBackend(Protocol):
    backend_id: str

    def query(self, prompt: str, images: Sequence[str], ctx: QueryContext) -> str: ...


@dataclass(frozen=True)
class BackendSpec:
    """Declarative backend configuration, buildable into a live backend.

    ``kind`` selects the implementation: ``simulated`` (tpr/fpr/seed against a
    truth table), ``replay`` (cache_dir, strict), or ``http_chat`` (endpoint,
    model name, key env var, timeout, retries). ``request_image_max_dim`` caps
    the longer image side before encoding; None sends images untouched.
    """

    kind: str
    tpr: float = 1.0
    fpr: float = 0.0
    seed: int = 0
    cache_dir: str | None = None
    strict: bool = True
    endpoint_url: str | None = None
    model_name: str | None = None
    api_key_env_var: str = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 3
    request_image_max_dim: int | None = None

    KINDS = ("simulated", "replay", "http_chat")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "simulated" and not (0 <= self.tpr <= 1 and 0 <= self.fpr <= 1):
            raise ValueError("simulated tpr and fpr must lie in [0, 1]")
        if self.kind == "replay" and not self.cache_dir:
            raise ValueError("replay backend requires cache_dir")
        if self.kind == "http_chat" and not (self.endpoint_url and self.model_name):
            raise ValueError("http_chat backend requires endpoint_url and model_name")

    def build(
        self,
        truth: Mapping[tuple[str, int], FrameLabel] | None = None,
        transport: httpx.BaseTransport | None = None,
    ) -> "ModelBackend":
        if self.kind == "simulated":
            if truth is None:
                raise TruthMissing("simulated backend needs a truth table")
            return SimulatedBackend(self.tpr, self.fpr, self.seed, truth)
        if self.kind == "replay":
            return ReplayBackend(self.cache_dir, strict=self.strict)
        return HttpChatBackend(
            endpoint_url=self.endpoint_url,
            model_name=self.model_name,
            api_key_env_var=self.api_key_env_var,
            timeout_s=self.timeout_s,
            max_retries=self.max_retries,
            image_max_dim=self.request_image_max_dim,
            transport=transport,
        )


class SimulatedBackend:
    """Emits canonical verdict JSON from ground truth perturbed by tpr/fpr.

    Each frame's draw is keyed by (seed, video_id, frame_index) only, so output
    is byte-identical regardless of call order, concurrency, or prompt content.
    """

    def __init__(self, tpr: float, fpr: float, seed: int, truth: Mapping[tuple[str, int], FrameLabel]):
        if not (0 <= tpr <= 1 and 0 <= fpr <= 1):
            raise ValueError("tpr and fpr must lie in [0, 1]")
        self.tpr = tpr
        self.fpr = fpr
        self.seed = seed
        self.truth = truth
        self.backend_id = f"simulated(tpr={tpr:g},fpr={fpr:g},seed={seed})"

    def query(self, prompt: str, images: Sequence[str], ctx: QueryContext) -> str:
        try:
            truth_label = self.truth[(ctx.video_id, ctx.frame_index)]
        except KeyError:
            raise TruthMissing(f"no truth label for {ctx.video_id}[t={ctx.frame_index}]") from None
        rate = self.tpr if truth_label is FrameLabel.GLITCHY else self.fpr
        detected = stable_uniform("sim", self.seed, ctx.video_id, ctx.frame_index) < rate
        return dumps_json_line({"reasoning": "simulated verdict", "glitch_detected": detected})


def request_digest(ctx: QueryContext, prompt: str, image_digests: Sequence[str]) -> str:
    parts = [ctx.video_id, str(ctx.frame_index), ctx.prompt_kind.value, prompt, *image_digests]
    return sha256_hex("\x1f".join(parts))


class ReplayBackend:
    """Serves responses from an on-disk cache keyed by the full request digest.

    A miss is always appended to ``misses.jsonl`` in the cache directory; in
    strict mode it then raises, otherwise an empty response is returned so the
    frame parses as Failed and takes the configured default label.
    """

    def __init__(self, cache_dir: str | Path, strict: bool = True):
        self.cache_dir = Path(cache_dir)
        self.strict = strict
        self.backend_id = f"replay({self.cache_dir.name})"
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _entry_path(self, digest: str) -> Path:
        return self.cache_dir / f"{digest}.json"

    def store(self, ctx: QueryContext, prompt: str, images: Sequence[str], raw_response: str) -> str:
        """Record a response under its request digest; returns the digest."""
        digest = request_digest(ctx, prompt, [sha256_hex(Path(p).read_bytes()) for p in images])
        entry = {"request_digest": digest, "raw_response": raw_response, "timestamp": time.time()}
        tmp = self._entry_path(digest).with_suffix(".json.tmp")
        tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
        tmp.rename(self._entry_path(digest))
        return digest

    def query(self, prompt: str, images: Sequence[str], ctx: QueryContext) -> str:
        try:
            image_digests = [sha256_hex(Path(p).read_bytes()) for p in images]
        except OSError as exc:
            raise BackendError(f"cannot digest request image: {exc}") from exc
        digest = request_digest(ctx, prompt, image_digests)
        entry_path = self._entry_path(digest)
        if entry_path.exists():
            entry = json.loads(entry_path.read_text(encoding="utf-8"))
            return entry["raw_response"]
        miss_line = dumps_json_line(
            {"request_digest": digest, "video_id": ctx.video_id, "frame_index": ctx.frame_index}
        )
        with (self.cache_dir / "misses.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(miss_line + "\n")
        if self.strict:
            raise CacheMiss(f"no cached response for {ctx.video_id}[t={ctx.frame_index}] ({digest[:12]})")
        return ""


_MIME_BY_SUFFIX = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg", ".webp": "image/webp"}


def encode_image(path: str | Path, max_dim: int | None = None) -> tuple[str, str]:
    """Read an image and return (mime_type, base64). Downscales the longer side
    to ``max_dim`` preserving aspect ratio when the image exceeds it."""
    path = Path(path)
    data = path.read_bytes()
    mime = _MIME_BY_SUFFIX.get(path.suffix.lower(), "image/png")
    if max_dim is not None:
        from PIL import Image

        with Image.open(io.BytesIO(data)) as img:
            if max(img.size) > max_dim:
                img.thumbnail((max_dim, max_dim))
                buf = io.BytesIO()
                fmt = "JPEG" if mime == "image/jpeg" else "PNG"
                img.save(buf, format=fmt)
                data = buf.getvalue()
                mime = f"image/{fmt.lower()}"
    return mime, base64.b64encode(data).decode("ascii")


@dataclass
class HttpChatBackend:
    """OpenAI-compatible chat-completions client taking one or two images.

    The request carries a single user message whose parts are the prompt text
    followed by the images in the order given (reference first, test second for
    pair prompts). Transport errors and 5xx responses are retried with
    exponential backoff up to ``max_retries`` times; the prompt is never
    mutated between attempts so cache keys stay stable.
    """

    endpoint_url: str
    model_name: str
    api_key_env_var: str = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 3
    image_max_dim: int | None = None
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    backoff_base_s: float = 0.5
    backend_id: str = field(init=False)

    def __post_init__(self) -> None:
        self.backend_id = f"http_chat({self.model_name})"
        self._client = httpx.Client(transport=self.transport, timeout=self.timeout_s)

    def close(self) -> None:
        self._client.close()

    def build_request_body(self, prompt: str, images: Sequence[str]) -> dict:
        if not 1 <= len(images) <= 2:
            raise BackendError(f"expected 1 or 2 images, got {len(images)}")
        parts: list[dict] = [{"type": "text", "text": prompt}]
        for image in images:
            mime, b64 = encode_image(image, self.image_max_dim)
            parts.append({"type": "image_url", "image_url": {"url": f"data:{mime};base64,{b64}"}})
        return {"model": self.model_name, "messages": [{"role": "user", "content": parts}]}

    def query(self, prompt: str, images: Sequence[str], ctx: QueryContext) -> str:
        api_key = os.environ.get(self.api_key_env_var)
        if not api_key:
            raise AuthMissing(f"environment variable {self.api_key_env_var} is not set")
        body = self.build_request_body(prompt, images)
        headers = {"Authorization": f"Bearer {api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff_base_s * 2 ** (attempt - 1))
            try:
                response = self._client.post(self.endpoint_url, json=body, headers=headers)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendError(
                    f"{ctx.video_id}[t={ctx.frame_index}]: HTTP {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
                raise BackendError(f"malformed completion response: {exc}") from exc
        raise TransportExhausted(
            f"{ctx.video_id}[t={ctx.frame_index}]: gave up after {self.max_retries + 1} attempts: {last_error}"
        )
