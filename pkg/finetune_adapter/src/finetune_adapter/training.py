"""Reward-weighted supervised fine-tuning of adapter weights.

Each feedback example contributes the cross-entropy of its target score's
byte tokens given the prompt, weighted by `max(reward, 0) + 1e-6`:
well-rewarded examples dominate the objective, penalized ones are
de-emphasized but never anti-trained. The Adam optimizer updates only the
adapter parameters; the base model stays frozen.

Training is fully deterministic for a given config: weights, adapter
initialization, and batch shuffling all derive from declared seeds, and
the run is pinned to a single compute thread so reduction order is stable.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import torch
import torch.nn.functional as F

from .errors import AdapterError, TrainingConfigError
from .feedback import FeedbackExample
from .model import (
    EOS_ID,
    TinyCausalLM,
    adapter_state_dict,
    apply_lora,
    build_base_model,
    encode_prompt,
    encode_target,
    load_adapter_state,
)

MIN_EXAMPLES = 10

# The output-head delta trains at the configured learning rate while the
# low-rank block adapters train at this fraction of it. The head is a linear
# readout of features that the frozen base already separates well, so it can
# (and must) move fast; letting the block adapters move at the same speed
# shifts those features faster than the readout can track them, and a short
# run then converges to a score-constant model. Two-speed fine-tuning keeps
# the feature drift slow and the readout convergent.
LORA_LR_SCALE = 0.02

ADAPTER_FILE = "adapter.pt"
METADATA_FILE = "metadata.json"
TRAINING_LOG_FILE = "training_log.json"


@dataclass(frozen=True)
class TrainingConfig:
    base_model: str = "tiny-instruct-64"
    epochs: int = 3
    learning_rate: float = 0.05
    batch_size: int = 2
    weight_decay: float = 0.01
    lora_rank: int = 8
    lora_alpha: float = 16.0
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise TrainingConfigError(
                f"epochs must be at least 1, got {self.epochs} (no-op training rejected)"
            )
        if not self.learning_rate > 0:
            raise TrainingConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise TrainingConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise TrainingConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.lora_rank < 1:
            raise TrainingConfigError(f"lora_rank must be at least 1, got {self.lora_rank}")
        if not self.lora_alpha > 0:
            raise TrainingConfigError(f"lora_alpha must be positive, got {self.lora_alpha}")


@dataclass(frozen=True)
class TrainingResult:
    adapter_dir: str
    base_model: str
    epoch_losses: tuple[float, ...]
    final_loss: float
    examples: int
    trainable_params: int


def _encode_example(example: FeedbackExample, context_bytes: int) -> tuple[list[int], int]:
    prompt_ids = encode_prompt(example.prompt, context_bytes)
    target_ids = encode_target(example.target_score)
    return prompt_ids + target_ids, len(prompt_ids)


def _batch_loss(model: TinyCausalLM, encoded: Sequence[tuple[list[int], int]],
                weights: Sequence[float]) -> tuple[torch.Tensor, float]:
    """Sum of weight_i * mean-CE_i over the batch, and the weight sum."""
    max_len = max(len(seq) for seq, _ in encoded)
    batch = torch.full((len(encoded), max_len), EOS_ID, dtype=torch.long)
    for row, (seq, _) in enumerate(encoded):
        batch[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
    logits = model(batch[:, :-1])
    total = None
    for row, ((seq, prompt_len), weight) in enumerate(zip(encoded, weights)):
        # Position p predicts token p+1: target tokens live at indices
        # [prompt_len, len(seq)) and are predicted from [prompt_len-1, len(seq)-1).
        target = batch[row, prompt_len: len(seq)]
        predicted = logits[row, prompt_len - 1: len(seq) - 1]
        example_ce = F.cross_entropy(predicted, target)
        term = weight * example_ce
        total = term if total is None else total + term
    return total, float(sum(weights))


def train_adapter(
    examples: Sequence[FeedbackExample],
    out_dir: str | Path,
    config: TrainingConfig = TrainingConfig(),
    log: Callable[[int, float], None] | None = None,
) -> TrainingResult:
    """Fine-tune adapter weights on feedback examples and save them.

    Writes `adapter.pt` (adapter tensors), `metadata.json` (everything
    needed to rebuild the adapted model plus the trained event ids), and
    `training_log.json` (per-epoch weighted training loss) into `out_dir`.
    """
    config.validate()
    if len(examples) < MIN_EXAMPLES:
        raise TrainingConfigError(
            f"need at least {MIN_EXAMPLES} feedback examples to fine-tune, got {len(examples)}"
        )
    model = build_base_model(config.base_model)
    apply_lora(model, rank=config.lora_rank, alpha=config.lora_alpha, seed=config.seed)
    model.train()
    context_bytes = model.spec.context_bytes
    encoded = [_encode_example(example, context_bytes) for example in examples]
    weights = [example.weight for example in examples]
    head_params = [
        param
        for name, param in model.named_parameters()
        if param.requires_grad and ("weight_delta" in name or "bias_delta" in name)
    ]
    lora_params = [
        param
        for name, param in model.named_parameters()
        if param.requires_grad and ("lora_a" in name or "lora_b" in name)
    ]
    optimizer = torch.optim.Adam(
        [
            {"params": head_params, "lr": config.learning_rate},
            {"params": lora_params, "lr": config.learning_rate * LORA_LR_SCALE},
        ],
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
    )
    shuffler = random.Random(config.seed)

    previous_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    torch.manual_seed(config.seed)
    epoch_losses: list[float] = []
    try:
        for epoch in range(config.epochs):
            order = list(range(len(examples)))
            shuffler.shuffle(order)
            numerator = 0.0
            denominator = 0.0
            for start in range(0, len(order), config.batch_size):
                index_batch = order[start: start + config.batch_size]
                batch_encoded = [encoded[i] for i in index_batch]
                batch_weights = [weights[i] for i in index_batch]
                weighted_sum, weight_total = _batch_loss(model, batch_encoded, batch_weights)
                loss = weighted_sum / weight_total
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                numerator += float(weighted_sum.detach())
                denominator += weight_total
            epoch_loss = numerator / denominator
            epoch_losses.append(epoch_loss)
            if log is not None:
                log(epoch + 1, epoch_loss)
    finally:
        torch.set_num_threads(previous_threads)

    model.eval()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = adapter_state_dict(model)
    torch.save(state, out_dir / ADAPTER_FILE)
    trainable_params = sum(tensor.numel() for tensor in state.values())
    reward_weights = [example.weight for example in examples]
    metadata = {
        "format_version": 1,
        **asdict(config),
        "context_bytes": context_bytes,
        "examples": len(examples),
        "trainable_params": trainable_params,
        "train_event_ids": sorted(example.event_id for example in examples),
        "epoch_losses": epoch_losses,
        "final_loss": epoch_losses[-1],
        "weight_stats": {
            "min": min(reward_weights),
            "max": max(reward_weights),
            "mean": sum(reward_weights) / len(reward_weights),
        },
    }
    (out_dir / METADATA_FILE).write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out_dir / TRAINING_LOG_FILE).write_text(
        json.dumps({"epoch_losses": epoch_losses, "final_loss": epoch_losses[-1]},
                   indent=2) + "\n",
        encoding="utf-8",
    )
    return TrainingResult(
        adapter_dir=str(out_dir),
        base_model=config.base_model,
        epoch_losses=tuple(epoch_losses),
        final_loss=epoch_losses[-1],
        examples=len(examples),
        trainable_params=trainable_params,
    )


def read_metadata(adapter_dir: str | Path) -> dict:
    path = Path(adapter_dir) / METADATA_FILE
    if not path.exists():
        raise AdapterError(f"adapter metadata not found at {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_trained_model(adapter_dir: str | Path) -> tuple[TinyCausalLM, dict]:
    """Rebuild the adapted model exactly as trained."""
    adapter_dir = Path(adapter_dir)
    metadata = read_metadata(adapter_dir)
    weights_path = adapter_dir / ADAPTER_FILE
    if not weights_path.exists():
        raise AdapterError(f"adapter weights not found at {weights_path}")
    model = build_base_model(metadata["base_model"])
    apply_lora(model, rank=metadata["lora_rank"], alpha=metadata["lora_alpha"],
               seed=metadata["seed"])
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    load_adapter_state(model, state)
    model.eval()
    return model, metadata
