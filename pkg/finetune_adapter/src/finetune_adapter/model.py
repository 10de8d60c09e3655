"""Tiny byte-level causal language models with LoRA adapters.

The registry holds small instruct-style models that are materialized
locally and deterministically: weights are drawn from a seeded generator,
so building the same model name twice gives bit-identical parameters on
the same platform. The base models are "neutral scorers" — their output
head is primed so that greedy decoding yields a parseable neutral answer
("0") for any prompt — which makes them a meaningful, well-defined
baseline for fine-tuning experiments without shipping pretrained weights.

Fine-tuning never touches base weights. `apply_lora` wraps every attention
and feed-forward projection (and the output head) in a low-rank adapter;
only the adapter matrices and an output-bias delta are trainable, and they
are initialized so the adapted model starts exactly equal to the base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ModelNotFoundError

VOCAB_SIZE = 258  # 256 byte values + BOS + EOS
BOS_ID = 256
EOS_ID = 257

NEUTRAL_BYTE = ord("0")
_PRIME_NEUTRAL = 1.0
_PRIME_EOS = 0.6
_INIT_STD = 0.02
# Query/key projections get a larger init so the untrained attention
# pattern is selective rather than a near-uniform average; selective
# random features retain far more about *which* bytes appear where,
# which is what downstream low-rank adapters read out.
_ATTN_INIT_STD = 0.12


@dataclass(frozen=True)
class ModelSpec:
    """Architecture and decoding settings for one registry entry."""

    name: str
    dim: int
    layers: int
    heads: int
    ff_dim: int
    context_bytes: int
    max_new_tokens: int
    seed: int

    @property
    def max_positions(self) -> int:
        return self.context_bytes + 16


MODEL_REGISTRY: dict[str, ModelSpec] = {
    "tiny-instruct-64": ModelSpec(
        name="tiny-instruct-64", dim=64, layers=2, heads=4, ff_dim=128,
        context_bytes=160, max_new_tokens=6, seed=1234,
    ),
    "tiny-instruct-32": ModelSpec(
        name="tiny-instruct-32", dim=32, layers=1, heads=2, ff_dim=64,
        context_bytes=160, max_new_tokens=6, seed=4321,
    ),
}


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int, ff_dim: int):
        super().__init__()
        self.heads = heads
        self.ln1 = nn.LayerNorm(dim)
        self.attn_qkv = nn.Linear(dim, 3 * dim)
        self.attn_out = nn.Linear(dim, dim)
        self.ln2 = nn.LayerNorm(dim)
        self.ff_in = nn.Linear(dim, ff_dim)
        self.ff_out = nn.Linear(ff_dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, seq, dim = x.shape
        head_dim = dim // self.heads
        q, k, v = self.attn_qkv(self.ln1(x)).chunk(3, dim=-1)
        q = q.view(batch, seq, self.heads, head_dim).transpose(1, 2)
        k = k.view(batch, seq, self.heads, head_dim).transpose(1, 2)
        v = v.view(batch, seq, self.heads, head_dim).transpose(1, 2)
        y = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        y = y.transpose(1, 2).reshape(batch, seq, dim)
        x = x + self.attn_out(y)
        x = x + self.ff_out(F.gelu(self.ff_in(self.ln2(x))))
        return x


class TinyCausalLM(nn.Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        self.tok_emb = nn.Embedding(VOCAB_SIZE, spec.dim)
        self.pos_emb = nn.Embedding(spec.max_positions, spec.dim)
        self.blocks = nn.ModuleList(
            _Block(spec.dim, spec.heads, spec.ff_dim) for _ in range(spec.layers)
        )
        self.ln_f = nn.LayerNorm(spec.dim)
        self.lm_head = nn.Linear(spec.dim, VOCAB_SIZE, bias=True)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        seq = tokens.shape[1]
        if seq > self.spec.max_positions:
            raise ValueError(
                f"sequence length {seq} exceeds model maximum {self.spec.max_positions}"
            )
        positions = torch.arange(seq, device=tokens.device)
        x = self.tok_emb(tokens) + self.pos_emb(positions)
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.ln_f(x))


def _init_parameters(model: TinyCausalLM, seed: int) -> None:
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, param in sorted(model.named_parameters()):
            if param.dim() >= 2:
                std = _ATTN_INIT_STD if "attn_qkv" in name else _INIT_STD
                param.copy_(torch.randn(param.shape, generator=generator) * std)
            elif name.endswith("bias"):
                param.zero_()
            else:  # LayerNorm scale
                param.fill_(1.0)
        # Prime the head so the untuned model greedily emits a parseable
        # neutral score instead of arbitrary bytes.
        model.lm_head.bias[NEUTRAL_BYTE] = _PRIME_NEUTRAL
        model.lm_head.bias[EOS_ID] = _PRIME_EOS


def build_base_model(name: str) -> TinyCausalLM:
    """Materialize a registry model with deterministic, seeded weights."""
    spec = MODEL_REGISTRY.get(name)
    if spec is None:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ModelNotFoundError(f"unknown base model {name!r} (known: {known})")
    model = TinyCausalLM(spec)
    _init_parameters(model, spec.seed)
    model.eval()
    return model


def encode_prompt(text: str, context_bytes: int) -> list[int]:
    """BOS followed by the trailing `context_bytes` bytes of the prompt."""
    data = text.encode("utf-8")[-context_bytes:]
    return [BOS_ID, *data]


def encode_target(score: int) -> list[int]:
    """Byte tokens of the signed decimal score, terminated by EOS.

    The sign is always written ("+8", "-8", "+0") so the first completion
    byte carries the direction decision on its own.
    """
    return [*f"{int(score):+d}".encode("ascii"), EOS_ID]


@torch.no_grad()
def greedy_decode(model: TinyCausalLM, prompt: str, max_new_tokens: int | None = None) -> str:
    """Deterministic temperature-0 decoding of a completion for `prompt`."""
    model.eval()
    spec = model.spec
    limit = spec.max_new_tokens if max_new_tokens is None else max_new_tokens
    tokens = torch.tensor([encode_prompt(prompt, spec.context_bytes)], dtype=torch.long)
    out: list[int] = []
    for step in range(limit):
        logits = model(tokens)[0, -1].clone()
        logits[BOS_ID] = -math.inf
        if step == 0:
            logits[EOS_ID] = -math.inf  # never answer with an empty completion
        next_id = int(logits.argmax())
        if next_id == EOS_ID:
            break
        out.append(next_id)
        if tokens.shape[1] >= spec.max_positions:
            break
        tokens = torch.cat([tokens, torch.tensor([[next_id]])], dim=1)
    return bytes(out).decode("latin-1")


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank residual.

    `lora_b` starts at zero so the wrapped layer is exactly equivalent to
    its base at initialization.
    """

    def __init__(self, base: nn.Linear, rank: int, alpha: float,
                 generator: torch.Generator):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        self.scaling = alpha / rank
        self.lora_a = nn.Parameter(
            torch.randn(rank, base.in_features, generator=generator)
            / math.sqrt(base.in_features)
        )
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * F.linear(F.linear(x, self.lora_a), self.lora_b)


class DeltaLinear(nn.Module):
    """A frozen linear layer plus a trainable full-rank weight/bias delta.

    Used on the output head: the head is the model's readout, and a
    zero-initialized full-rank delta there is exactly a trainable linear
    probe over the frozen features — small (the head is a tiny fraction of
    the model) but able to express any readout the features support,
    whereas a low-rank residual would initially confine learning to a few
    random feature projections.
    """

    def __init__(self, base: nn.Linear):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        self.weight_delta = nn.Parameter(
            torch.zeros(base.out_features, base.in_features)
        )
        self.bias_delta = nn.Parameter(torch.zeros(base.out_features))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + F.linear(x, self.weight_delta) + self.bias_delta


def apply_lora(model: TinyCausalLM, rank: int = 8, alpha: float = 16.0,
               seed: int = 0) -> TinyCausalLM:
    """Wrap projections in low-rank adapters and the head in a delta probe.

    Everything except the adapter parameters is frozen, and every adapter
    tensor that feeds the output starts at zero, so the wrapped model
    computes exactly the base model's outputs until training moves it.
    """
    generator = torch.Generator().manual_seed(seed)
    for block in model.blocks:
        block.attn_qkv = LoRALinear(block.attn_qkv, rank, alpha, generator)
        block.attn_out = LoRALinear(block.attn_out, rank, alpha, generator)
        block.ff_in = LoRALinear(block.ff_in, rank, alpha, generator)
        block.ff_out = LoRALinear(block.ff_out, rank, alpha, generator)
    model.lm_head = DeltaLinear(model.lm_head)
    for name, param in model.named_parameters():
        param.requires_grad_("lora_a" in name or "lora_b" in name
                             or "weight_delta" in name or "bias_delta" in name)
    return model


def adapter_state_dict(model: TinyCausalLM) -> dict[str, torch.Tensor]:
    """The trainable (adapter-only) parameters, detached."""
    return {
        name: param.detach().clone()
        for name, param in model.named_parameters()
        if param.requires_grad
    }


def load_adapter_state(model: TinyCausalLM, state: dict[str, torch.Tensor]) -> None:
    """Copy saved adapter tensors into a LoRA-wrapped model, strictly."""
    trainable = {name: param for name, param in model.named_parameters()
                 if param.requires_grad}
    missing = sorted(set(trainable) - set(state))
    unexpected = sorted(set(state) - set(trainable))
    if missing or unexpected:
        raise ValueError(
            f"adapter state mismatch (missing: {missing[:3]}, unexpected: {unexpected[:3]})"
        )
    with torch.no_grad():
        for name, param in trainable.items():
            if state[name].shape != param.shape:
                raise ValueError(
                    f"adapter tensor {name!r} has shape {tuple(state[name].shape)}, "
                    f"expected {tuple(param.shape)}"
                )
            param.copy_(state[name])
