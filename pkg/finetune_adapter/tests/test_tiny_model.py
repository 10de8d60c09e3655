"""Base model registry, deterministic init, decoding, and adapter plumbing."""

from __future__ import annotations

import re

import pytest
import torch
from hypothesis import given, settings, strategies as st

from finetune_adapter import MODEL_REGISTRY, ModelNotFoundError, build_base_model, greedy_decode
from finetune_adapter.model import (
    BOS_ID,
    EOS_ID,
    adapter_state_dict,
    apply_lora,
    encode_prompt,
    encode_target,
    load_adapter_state,
)

INT_TOKEN = re.compile(r"[-+]?\d+")


@pytest.fixture(scope="module")
def base32():
    return build_base_model("tiny-instruct-32")


def test_registry_has_small_models():
    assert "tiny-instruct-64" in MODEL_REGISTRY
    assert "tiny-instruct-32" in MODEL_REGISTRY


def test_unknown_model_is_rejected_with_known_names():
    with pytest.raises(ModelNotFoundError, match="tiny-instruct-64"):
        build_base_model("gpt-17-enormous")


def test_seeded_init_is_reproducible():
    a = build_base_model("tiny-instruct-32").state_dict()
    b = build_base_model("tiny-instruct-32").state_dict()
    assert a.keys() == b.keys()
    for key in a:
        assert torch.equal(a[key], b[key]), key


def test_base_model_emits_parseable_neutral_score(base32):
    for model_name in ("tiny-instruct-32", "tiny-instruct-64"):
        model = base32 if model_name == "tiny-instruct-32" else build_base_model(model_name)
        text = greedy_decode(model, "Some headline: prices moved. Respond with one integer.")
        match = INT_TOKEN.search(text)
        assert match is not None, f"{model_name} produced unparseable {text!r}"
        assert int(match.group()) == 0, f"{model_name} is not neutral before tuning: {text!r}"


def test_greedy_decode_is_deterministic(base32):
    prompt = "Headline (TK01): TK01 reports record quarterly profit."
    assert greedy_decode(base32, prompt) == greedy_decode(base32, prompt)


def test_greedy_decode_is_nonempty_even_at_one_token(base32):
    out = greedy_decode(base32, "x", max_new_tokens=1)
    assert len(out) == 1


def test_encode_prompt_starts_with_bos_and_truncates():
    ids = encode_prompt("abc", 160)
    assert ids[0] == BOS_ID
    assert ids[1:] == [ord("a"), ord("b"), ord("c")]
    long_ids = encode_prompt("y" * 500 + "abc", 8)
    assert long_ids[0] == BOS_ID
    assert len(long_ids) == 9
    assert bytes(long_ids[1:]).decode() == "yyyyyabc"


@given(st.text(min_size=0, max_size=400), st.integers(min_value=1, max_value=64))
@settings(max_examples=50, deadline=None)
def test_encode_prompt_length_bound(text, context_bytes):
    ids = encode_prompt(text, context_bytes)
    assert ids[0] == BOS_ID
    assert len(ids) <= context_bytes + 1
    assert all(0 <= t < 256 for t in ids[1:])


@pytest.mark.parametrize(
    "score, expected_text",
    [(8, "+8"), (-8, "-8"), (0, "+0"), (10, "+10"), (-10, "-10")],
)
def test_encode_target_is_sign_first(score, expected_text):
    ids = encode_target(score)
    assert ids[-1] == EOS_ID
    assert bytes(ids[:-1]).decode("ascii") == expected_text


def test_apply_lora_preserves_base_function():
    model = build_base_model("tiny-instruct-32")
    prompt = "Headline: TK00 announces layoffs amid weakening demand."
    before = greedy_decode(model, prompt)
    apply_lora(model, rank=4, alpha=8.0, seed=0)
    after = greedy_decode(model, prompt)
    assert before == after


def test_only_adapter_params_are_trainable():
    model = build_base_model("tiny-instruct-32")
    apply_lora(model, rank=4, alpha=8.0, seed=0)
    adapter_markers = ("lora_a", "lora_b", "weight_delta", "bias_delta")
    for name, param in model.named_parameters():
        expects_grad = any(marker in name for marker in adapter_markers)
        assert param.requires_grad == expects_grad, name
    assert sum(p.requires_grad for p in model.parameters()) > 0


def test_adapter_state_round_trip_reproduces_outputs():
    torch.manual_seed(7)
    donor = build_base_model("tiny-instruct-32")
    apply_lora(donor, rank=4, alpha=8.0, seed=3)
    with torch.no_grad():
        for name, param in donor.named_parameters():
            if param.requires_grad:
                param.add_(torch.randn_like(param) * 0.05)
    state = adapter_state_dict(donor)

    clone = build_base_model("tiny-instruct-32")
    apply_lora(clone, rank=4, alpha=8.0, seed=3)
    load_adapter_state(clone, state)

    prompt = "Headline (TK03): TK03 reports record quarterly profit."
    assert greedy_decode(clone, prompt) == greedy_decode(donor, prompt)


def test_adapter_state_shape_mismatch_is_rejected():
    donor = build_base_model("tiny-instruct-32")
    apply_lora(donor, rank=4, alpha=8.0, seed=0)
    state = adapter_state_dict(donor)

    wrong_rank = build_base_model("tiny-instruct-32")
    apply_lora(wrong_rank, rank=2, alpha=8.0, seed=0)
    with pytest.raises(Exception, match="shape"):
        load_adapter_state(wrong_rank, state)


def test_adapter_state_missing_key_is_rejected():
    donor = build_base_model("tiny-instruct-32")
    apply_lora(donor, rank=4, alpha=8.0, seed=0)
    state = adapter_state_dict(donor)
    state.pop(sorted(state)[0])
    clone = build_base_model("tiny-instruct-32")
    apply_lora(clone, rank=4, alpha=8.0, seed=0)
    with pytest.raises(Exception, match="missing"):
        load_adapter_state(clone, state)
