"""Signal-evaluation harness for headline-driven trading signals.

Pipeline: ingest headlines and prices into aligned events, score them with a
pluggable sentiment source (LLM endpoint, replay file, or lexicon baseline),
map scores to long/short/hold actions, reward them against realized forward
returns, backtest, and calibrate the reward thresholds.
"""

__version__ = "0.1.0"

from .market_data import AlignedEvent, Headline, PriceBar, align_events, split_periods
from .prompt_forge import PromptConfig, PromptText, default_config, render_prompt
from .rlmf_reward import Action, RewardParams, RewardRecord, compute_reward, map_action
from .signal_engine import SentimentSignal, SignalSourceSpec, baseline_score, parse_score

__all__ = [
    "__version__",
    "AlignedEvent",
    "Headline",
    "PriceBar",
    "align_events",
    "split_periods",
    "PromptConfig",
    "PromptText",
    "default_config",
    "render_prompt",
    "Action",
    "RewardParams",
    "RewardRecord",
    "compute_reward",
    "map_action",
    "SentimentSignal",
    "SignalSourceSpec",
    "baseline_score",
    "parse_score",
]
