"""Reward-weighted fine-tuning of a tiny local instruct model.

Consumes reward-annotated feedback records, trains LoRA adapter weights
with a reward-weighted cross-entropy objective, serves the result behind a
local OpenAI-compatible chat-completions endpoint, and evaluates base vs
adapted models on held-out events through the external evaluation harness.
"""

__version__ = "0.1.0"

from .errors import (
    AdapterError,
    EndpointStartupError,
    EvalLeakageError,
    FeedbackFormatError,
    HarnessInvocationError,
    ModelNotFoundError,
    TrainingConfigError,
)
from .evaluate import EvalReport, RewardSettings, evaluate_adapter
from .feedback import WEIGHT_EPSILON, FeedbackExample, load_feedback
from .model import (
    MODEL_REGISTRY,
    ModelSpec,
    TinyCausalLM,
    apply_lora,
    build_base_model,
    greedy_decode,
)
from .serving import AdapterServer
from .training import TrainingConfig, TrainingResult, load_trained_model, train_adapter

__all__ = [
    "AdapterError",
    "AdapterServer",
    "EvalLeakageError",
    "EvalReport",
    "EndpointStartupError",
    "FeedbackExample",
    "FeedbackFormatError",
    "HarnessInvocationError",
    "MODEL_REGISTRY",
    "ModelNotFoundError",
    "ModelSpec",
    "RewardSettings",
    "TinyCausalLM",
    "TrainingConfig",
    "TrainingConfigError",
    "TrainingResult",
    "WEIGHT_EPSILON",
    "apply_lora",
    "build_base_model",
    "evaluate_adapter",
    "greedy_decode",
    "load_feedback",
    "load_trained_model",
    "train_adapter",
    "__version__",
]
