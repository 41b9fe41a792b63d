from __future__ import annotations

import base64
import io
import json

import httpx
import pytest

from glitchtriage.backends import (
    AuthMissing,
    BackendError,
    BackendSpec,
    CacheMiss,
    HttpChatBackend,
    QueryContext,
    ReplayBackend,
    SimulatedBackend,
    TransportExhausted,
    TruthMissing,
    encode_image,
)
from glitchtriage.core import FrameLabel, PromptKind
from glitchtriage.prompting import parse_verdict


def ctx(video="v1", t=1, kind=PromptKind.SINGLE_FRAME) -> QueryContext:
    return QueryContext(video, t, kind)


class TestSimulated:
    def test_degenerate_rates_reproduce_truth(self):
        truth = {("v1", 1): FrameLabel.CLEAN, ("v1", 2): FrameLabel.GLITCHY, ("v1", 3): FrameLabel.CLEAN}
        backend = SimulatedBackend(tpr=1.0, fpr=0.0, seed=3, truth=truth)
        for t, expected in ((1, False), (2, True), (3, False)):
            verdict = parse_verdict(backend.query("p", [], ctx(t=t)))
            assert verdict.glitch_detected is expected

    def test_byte_reproducible_and_order_independent(self):
        truth = {(f"v{i}", t): FrameLabel.GLITCHY for i in range(3) for t in range(1, 5)}
        a = SimulatedBackend(0.5, 0.1, seed=9, truth=truth)
        b = SimulatedBackend(0.5, 0.1, seed=9, truth=truth)
        forward = [a.query("p", [], ctx(f"v{i}", t)) for i in range(3) for t in range(1, 5)]
        backward = [b.query("p", [], ctx(f"v{i}", t)) for i in reversed(range(3)) for t in reversed(range(1, 5))]
        assert forward == list(reversed(backward))

    def test_prompt_and_images_do_not_affect_the_draw(self):
        truth = {("v1", 1): FrameLabel.GLITCHY}
        backend = SimulatedBackend(0.5, 0.1, seed=4, truth=truth)
        assert backend.query("one prompt", [], ctx()) == backend.query("another prompt", [], ctx())

    def test_truth_missing(self):
        backend = SimulatedBackend(1.0, 0.0, seed=0, truth={})
        with pytest.raises(TruthMissing):
            backend.query("p", [], ctx())

    def test_empirical_rates_near_configured(self):
        # Deterministic Monte-Carlo estimate over 10 000 frames of each class.
        n = 10_000
        truth_glitchy = {("mc", t): FrameLabel.GLITCHY for t in range(1, n + 1)}
        backend = SimulatedBackend(tpr=0.76, fpr=0.2956, seed=7, truth=truth_glitchy)
        hits = sum(
            json.loads(backend.query("p", [], ctx("mc", t)))["glitch_detected"] for t in range(1, n + 1)
        )
        assert abs(hits / n - 0.76) <= 0.01

        truth_clean = {("mc", t): FrameLabel.CLEAN for t in range(1, n + 1)}
        backend = SimulatedBackend(tpr=0.76, fpr=0.2956, seed=7, truth=truth_clean)
        false_hits = sum(
            json.loads(backend.query("p", [], ctx("mc", t)))["glitch_detected"] for t in range(1, n + 1)
        )
        assert abs(false_hits / n - 0.2956) <= 0.01

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            SimulatedBackend(1.5, 0.0, 0, {})
        with pytest.raises(ValueError):
            BackendSpec(kind="simulated", tpr=0.5, fpr=-0.1)


class TestReplay:
    def test_store_then_query_round_trip(self, tmp_path):
        img = tmp_path / "frame.png"
        img.write_bytes(b"pixels")
        backend = ReplayBackend(tmp_path / "cache")
        raw = '{"reasoning": "cached", "glitch_detected": true}'
        backend.store(ctx(), "prompt", [str(img)], raw)
        assert backend.query("prompt", [str(img)], ctx()) == raw

    def test_miss_in_strict_mode_raises_and_records(self, tmp_path):
        img = tmp_path / "frame.png"
        img.write_bytes(b"pixels")
        backend = ReplayBackend(tmp_path / "cache", strict=True)
        with pytest.raises(CacheMiss):
            backend.query("prompt", [str(img)], ctx())
        misses = (tmp_path / "cache" / "misses.jsonl").read_text().splitlines()
        assert len(misses) == 1
        assert json.loads(misses[0])["video_id"] == "v1"

    def test_miss_in_lenient_mode_returns_empty(self, tmp_path):
        img = tmp_path / "frame.png"
        img.write_bytes(b"pixels")
        backend = ReplayBackend(tmp_path / "cache", strict=False)
        raw = backend.query("prompt", [str(img)], ctx())
        assert raw == ""
        assert parse_verdict(raw).parse_status.value == "Failed"

    def test_key_depends_on_prompt_images_and_context(self, tmp_path):
        img_a, img_b = tmp_path / "a.png", tmp_path / "b.png"
        img_a.write_bytes(b"aaa")
        img_b.write_bytes(b"bbb")
        backend = ReplayBackend(tmp_path / "cache", strict=True)
        backend.store(ctx(), "prompt", [str(img_a), str(img_b)], "cached text")
        # reversed image order is a different request
        with pytest.raises(CacheMiss):
            backend.query("prompt", [str(img_b), str(img_a)], ctx())
        with pytest.raises(CacheMiss):
            backend.query("other prompt", [str(img_a), str(img_b)], ctx())
        with pytest.raises(CacheMiss):
            backend.query("prompt", [str(img_a), str(img_b)], ctx(t=2))


def completion_response(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def make_http_backend(handler, **kwargs) -> HttpChatBackend:
    kwargs.setdefault("endpoint_url", "https://api.test/v1/chat/completions")
    kwargs.setdefault("model_name", "test-vlm")
    kwargs.setdefault("sleep", lambda s: None)
    return HttpChatBackend(transport=httpx.MockTransport(handler), **kwargs)


@pytest.fixture
def two_images(tmp_path):
    ref, test = tmp_path / "ref.png", tmp_path / "test.png"
    ref.write_bytes(b"ref-bytes")
    test.write_bytes(b"test-bytes")
    return str(ref), str(test)


class TestHttpChat:
    def test_happy_path_extracts_content(self, monkeypatch, two_images):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["body"] = json.loads(request.content)
            seen["auth"] = request.headers["Authorization"]
            return httpx.Response(200, json=completion_response('{"glitch_detected": false}'))

        backend = make_http_backend(handler)
        raw = backend.query("the prompt", list(two_images), ctx(kind=PromptKind.PAIR_CLEAN_REF))
        assert raw == '{"glitch_detected": false}'
        assert seen["auth"] == "Bearer sk-test"
        assert seen["body"]["model"] == "test-vlm"

    def test_reference_image_precedes_test_image(self, monkeypatch, two_images):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        captured = {}

        def handler(request: httpx.Request) -> httpx.Response:
            captured["body"] = json.loads(request.content)
            return httpx.Response(200, json=completion_response("ok"))

        backend = make_http_backend(handler)
        backend.query("p", list(two_images), ctx(kind=PromptKind.PAIR_CLEAN_REF))
        parts = captured["body"]["messages"][0]["content"]
        assert parts[0] == {"type": "text", "text": "p"}
        urls = [p["image_url"]["url"] for p in parts[1:]]
        ref_b64 = base64.b64encode(b"ref-bytes").decode()
        test_b64 = base64.b64encode(b"test-bytes").decode()
        assert urls[0].endswith(ref_b64)
        assert urls[1].endswith(test_b64)

    def test_retries_on_5xx_then_succeeds(self, monkeypatch, two_images):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        attempts = []
        naps = []

        def handler(request: httpx.Request) -> httpx.Response:
            attempts.append(1)
            if len(attempts) < 3:
                return httpx.Response(503, text="overloaded")
            return httpx.Response(200, json=completion_response("fine"))

        backend = make_http_backend(handler, max_retries=3, sleep=naps.append)
        assert backend.query("p", [two_images[0]], ctx()) == "fine"
        assert len(attempts) == 3
        assert naps == [0.5, 1.0]  # exponential backoff

    def test_transport_exhausted(self, monkeypatch, two_images):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")

        def handler(request: httpx.Request) -> httpx.Response:
            raise httpx.ConnectError("refused")

        backend = make_http_backend(handler, max_retries=2)
        with pytest.raises(TransportExhausted, match="3 attempts"):
            backend.query("p", [two_images[0]], ctx())

    def test_4xx_fails_without_retry(self, monkeypatch, two_images):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        attempts = []

        def handler(request: httpx.Request) -> httpx.Response:
            attempts.append(1)
            return httpx.Response(401, text="bad key")

        backend = make_http_backend(handler, max_retries=3)
        with pytest.raises(BackendError, match="HTTP 401"):
            backend.query("p", [two_images[0]], ctx())
        assert len(attempts) == 1

    def test_auth_missing(self, monkeypatch, two_images):
        monkeypatch.delenv("OPENAI_API_KEY", raising=False)
        backend = make_http_backend(lambda r: httpx.Response(200, json=completion_response("x")))
        with pytest.raises(AuthMissing, match="OPENAI_API_KEY"):
            backend.query("p", [two_images[0]], ctx())

    def test_image_count_validated(self, monkeypatch, two_images):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        backend = make_http_backend(lambda r: httpx.Response(200, json=completion_response("x")))
        with pytest.raises(BackendError, match="1 or 2 images"):
            backend.query("p", [], ctx())


def test_encode_image_downscales_to_max_dim(tmp_path):
    from PIL import Image

    big = tmp_path / "big.png"
    Image.new("RGB", (640, 320), (200, 10, 10)).save(big)
    mime, b64 = encode_image(big, max_dim=100)
    assert mime == "image/png"
    with Image.open(io.BytesIO(base64.b64decode(b64))) as thumb:
        assert max(thumb.size) <= 100
        assert thumb.size[0] / thumb.size[1] == pytest.approx(2.0, abs=0.05)
    # without a cap the bytes pass through untouched
    _, raw_b64 = encode_image(big)
    assert base64.b64decode(raw_b64) == big.read_bytes()


def test_backend_spec_validation():
    with pytest.raises(ValueError, match="unknown backend kind"):
        BackendSpec(kind="nope")
    with pytest.raises(ValueError, match="cache_dir"):
        BackendSpec(kind="replay")
    with pytest.raises(ValueError, match="endpoint_url"):
        BackendSpec(kind="http_chat")
    with pytest.raises(TruthMissing):
        BackendSpec(kind="simulated").build()
