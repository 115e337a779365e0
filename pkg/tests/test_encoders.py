import json

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relforge.encoders import (
    EncoderError,
    EncoderSpec,
    MockEncoder,
    RemoteEncoder,
    build_encoder,
    l2_normalize,
)

SPEC = EncoderSpec(name="mock-a", dimension=64, max_input_chars=200)


def test_l2_normalize_three_four_five():
    np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)


def test_l2_normalize_unit_vector_unchanged():
    v = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(l2_normalize(v), v, atol=1e-15)


def test_l2_normalize_zero_vector_rejected():
    with pytest.raises(EncoderError):
        l2_normalize([0.0, 0.0])


@given(
    st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).filter(lambda x: abs(x) > 1e-6),
        min_size=1,
        max_size=32,
    )
)
def test_l2_normalize_idempotent(values):
    once = l2_normalize(values)
    twice = l2_normalize(once)
    assert np.max(np.abs(twice - once)) <= 1e-12
    assert abs(np.linalg.norm(once) - 1.0) <= 1e-12


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=2, max_value=16))
def test_normalization_preserves_cosine_argmax(seed, n):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, 8)) * rng.uniform(0.1, 10.0, size=(n, 1))
    query = l2_normalize(rng.standard_normal(8))
    cosines_raw = [
        float(query @ row / np.linalg.norm(row)) for row in raw
    ]
    normalized = np.vstack([l2_normalize(row) for row in raw])
    cosines_norm = normalized @ query
    assert int(np.argmax(cosines_raw)) == int(np.argmax(cosines_norm))


def test_mock_encoder_batch_determinism():
    encoder = MockEncoder(SPEC)
    out = encoder.encode(["pump defective", "pump defective"])
    assert np.array_equal(out[0], out[1])


def test_mock_encoder_same_name_same_vector_bit_for_bit():
    a = MockEncoder(SPEC).encode(["ventil undicht"])
    b = MockEncoder(EncoderSpec(name="mock-a", dimension=64, max_input_chars=200)).encode(
        ["ventil undicht"]
    )
    assert np.array_equal(a, b)


def test_mock_encoder_differs_across_names():
    a = MockEncoder(SPEC).encode(["ventil undicht"])
    b = MockEncoder(EncoderSpec(name="mock-b", dimension=64, max_input_chars=200)).encode(
        ["ventil undicht"]
    )
    assert not np.allclose(a, b)


def test_mock_encoder_outputs_unit_norm():
    out = MockEncoder(SPEC).encode(["alpha beta gamma", "x", "druck alarm kessel reaktor"])
    norms = np.linalg.norm(out, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-6)


def test_mock_encoder_truncates_before_encoding():
    encoder = MockEncoder(SPEC)
    base = "wort " * 40  # 200 chars
    extended = base + "extra stuff beyond the cap" + "y" * 24
    out = encoder.encode([base[:200], extended])
    assert np.array_equal(out[0], out[1])


def test_mock_encoder_rejects_empty_input():
    encoder = MockEncoder(SPEC)
    with pytest.raises(EncoderError):
        encoder.encode([])
    with pytest.raises(EncoderError):
        encoder.encode(["ok", ""])


def _embedding_response(batch, dimension):
    return {
        "data": [
            {"embedding": [float(i + 1)] + [0.0] * (dimension - 1)} for i, _ in enumerate(batch)
        ]
    }


def remote_encoder(handler, **kwargs):
    spec = kwargs.pop("spec", EncoderSpec(name="remote", dimension=4, endpoint="http://enc.test/v1",
                                          max_input_chars=50, batch_size=2))
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return RemoteEncoder(spec, client=client, sleep=lambda _: None, **kwargs)


def test_remote_encoder_posts_expected_shape_and_normalizes():
    seen = {}

    def handler(request):
        seen["payload"] = json.loads(request.content)
        return httpx.Response(200, json=_embedding_response(seen["payload"]["input"], 4))

    encoder = remote_encoder(handler)
    out = encoder.encode(["hello", "world"])
    assert seen["payload"] == {"input": ["hello", "world"], "model": "remote"}
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)


def test_remote_encoder_truncates_input():
    def handler(request):
        payload = json.loads(request.content)
        assert all(len(t) <= 50 for t in payload["input"])
        return httpx.Response(200, json=_embedding_response(payload["input"], 4))

    encoder = remote_encoder(handler)
    encoder.encode(["x" * 300])


def test_remote_encoder_retries_5xx_then_succeeds():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] < 3:
            return httpx.Response(503)
        payload = json.loads(request.content)
        return httpx.Response(200, json=_embedding_response(payload["input"], 4))

    encoder = remote_encoder(handler)
    out = encoder.encode(["a"])
    assert calls["n"] == 3
    assert out.shape == (1, 4)


def test_remote_encoder_gives_up_after_three_attempts():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(500)

    encoder = remote_encoder(handler)
    with pytest.raises(EncoderError, match="after 3 attempts"):
        encoder.encode(["a"])
    assert calls["n"] == 3


def test_remote_encoder_does_not_retry_4xx():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(400, text="bad request")

    encoder = remote_encoder(handler)
    with pytest.raises(EncoderError, match="rejected"):
        encoder.encode(["a"])
    assert calls["n"] == 1


def test_remote_encoder_rejects_dimension_mismatch():
    def handler(request):
        payload = json.loads(request.content)
        return httpx.Response(
            200, json={"data": [{"embedding": [1.0, 2.0]} for _ in payload["input"]]}
        )

    encoder = remote_encoder(handler)
    with pytest.raises(EncoderError, match="dimension mismatch"):
        encoder.encode(["a"])


def test_remote_encoder_reassembles_concurrent_batches_in_order():
    def handler(request):
        payload = json.loads(request.content)
        data = []
        for text in payload["input"]:
            value = float(int(text.removeprefix("t"))) + 1.0
            data.append({"embedding": [value, 1.0, 0.0, 0.0]})
        return httpx.Response(200, json={"data": data})

    encoder = remote_encoder(handler)
    texts = [f"t{i}" for i in range(10)]  # 5 batches of 2
    out = encoder.encode(texts)
    assert out.shape == (10, 4)
    recovered = out[:, 0] / out[:, 1]  # angle survives normalization
    np.testing.assert_allclose(recovered, np.arange(10) + 1.0, atol=1e-9)


def test_build_encoder_picks_mock_without_endpoint():
    assert isinstance(build_encoder(EncoderSpec(name="m", dimension=8)), MockEncoder)
