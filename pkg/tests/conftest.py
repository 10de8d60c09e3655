"""Shared fixtures: small on-disk corpora for end-to-end CLI tests."""

from __future__ import annotations

import pytest

import corpus
from rlmf_harness.signal_engine import write_signals_jsonl


@pytest.fixture()
def planted_files(tmp_path):
    """Planted corpus (4 tickers x 8 events, no noise) written as CLI inputs."""
    headlines, prices, signals = corpus.planted_corpus(
        n_tickers=4, events_per_ticker=8, seed=11
    )
    paths = {
        "headlines": tmp_path / "headlines.csv",
        "prices": tmp_path / "prices.csv",
        "replay": tmp_path / "replay.jsonl",
        "dir": tmp_path,
    }
    corpus.write_headlines_csv(paths["headlines"], headlines)
    corpus.write_prices_csv(paths["prices"], prices)
    write_signals_jsonl(signals, paths["replay"])
    return paths
