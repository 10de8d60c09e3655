"""Acceptance gate: one test per release-blocking criterion.

Each test pins the tolerance and runtime budget it must meet and prints a
single [PASS] line (visible with `pytest -s`; the -v test status line carries
the same pass/fail verdict per criterion).
"""

from __future__ import annotations

import math
import random
import time
from datetime import date, timedelta

import pytest

import corpus
import oracles
from checks import assert_report_matches_naive, run_cli
from rlmf_harness.backtester import run_backtest
from rlmf_harness.calibration import CalibrationGrid, evaluate_params, grid_calibrate
from rlmf_harness.errors import LeakageError
from rlmf_harness.manifest import sha256_file
from rlmf_harness.market_data import align_events
from rlmf_harness.rlmf_reward import RewardParams, batch_rewards, compute_reward, map_action
from rlmf_harness.signal_engine import write_signals_jsonl

PAIRS_PER_PROPERTY = 10_000


def _finish(name: str, started: float, limit: float) -> None:
    elapsed = time.perf_counter() - started
    assert elapsed < limit, f"{name} took {elapsed:.3f}s (budget {limit}s)"
    print(f"[PASS] {name}: {elapsed:.3f}s (budget {limit}s)")


def _params(tau, theta, beta):
    return RewardParams(
        signal_strength=10, action_threshold=tau,
        movement_threshold=theta, hold_reward=beta,
    )


# 1. Reward-function property suite: 10,000 randomized (score, R) pairs per
#    property, floating-point tolerance 1e-12, budget < 1 s.
def test_reward_property_suite():
    start = time.perf_counter()
    rng = random.Random(1001)

    for _ in range(PAIRS_PER_PROPERTY):  # direction antisymmetry
        tau = rng.randint(1, 9)
        params = _params(tau, rng.uniform(1e-4, 0.1), rng.uniform(0.0, 0.01))
        score = rng.choice([1, -1]) * rng.randint(tau + 1, 10)
        r = rng.choice([1, -1]) * rng.uniform(params.movement_threshold, 0.5)
        assert abs(
            compute_reward(-score, params, -r) - compute_reward(score, params, r)
        ) <= 1e-12

    for _ in range(PAIRS_PER_PROPERTY):  # sign correctness
        tau = rng.randint(1, 9)
        theta = rng.uniform(1e-4, 0.1)
        params = _params(tau, theta, rng.uniform(0.0, 0.01))
        magnitude = rng.randint(tau + 1, 10)
        r = theta + rng.uniform(0.0, 0.4)
        assert compute_reward(magnitude, params, r) > 0
        assert compute_reward(magnitude, params, -r) < 0
        assert compute_reward(-magnitude, params, -r) > 0
        assert compute_reward(-magnitude, params, r) < 0

    for _ in range(PAIRS_PER_PROPERTY):  # confidence monotonicity
        tau = rng.randint(1, 9)
        theta = rng.uniform(0.0, 0.1)
        params = _params(tau, theta, rng.uniform(0.0, 0.01))
        low = rng.randint(tau + 1, 10)
        high = rng.randint(low, 10)
        r = rng.choice([1, -1]) * rng.uniform(theta, 0.5)
        assert abs(compute_reward(low, params, r)) <= (
            abs(compute_reward(high, params, r)) + 1e-12
        )

    for _ in range(PAIRS_PER_PROPERTY):  # |reward| bound
        params = _params(rng.randint(1, 9), rng.uniform(0.0, 0.1),
                         rng.uniform(0.0, 0.01))
        score = rng.randint(-10, 10)
        r = rng.uniform(-0.5, 0.5)
        reward = compute_reward(score, params, r)
        assert abs(reward) <= max(abs(r), params.hold_reward) + 1e-12
        assert math.isfinite(reward)

    _finish("reward-property-suite", start, 1.0)


# 2. Action-mapping brute force: S = 10, every tau in 1..9 crossed with all 21
#    integer scores — 189 exact matches against enumeration, budget < 0.1 s.
def test_action_mapping_brute_force():
    start = time.perf_counter()
    cases = 0
    for tau in range(1, 10):
        for score in range(-10, 11):
            assert map_action(score, tau).value == oracles.naive_action(score, tau)
            cases += 1
    assert cases == 189
    _finish("action-mapping-brute-force", start, 0.1)


# 3. Alignment oracle equivalence: 10 tickers x 250 trading days, 2,000
#    headlines including weekend-dated and end-of-series cases, budget < 5 s.
def test_alignment_oracle_equivalence():
    start = time.perf_counter()
    rng = random.Random(17)
    days = corpus.weekdays(date(2020, 1, 6), 250)
    prices = {}
    flat_bars = []
    for i in range(10):
        ticker = corpus.ticker_name(i)
        bars = corpus.random_walk_bars(ticker, days, rng)
        prices[ticker] = bars
        flat_bars.extend((b.ticker, b.date, b.close) for b in bars)

    headlines = []

    def add(day):
        n = len(headlines)
        ticker = corpus.ticker_name(rng.randrange(10))
        headlines.append(corpus.make_headline(f"h{n:04d}", ticker, day, f"item {n}"))

    for i in range(25):  # weekend-dated
        base = days[8 * i]
        add(base + timedelta(days=5 - base.weekday()))
    for _ in range(25):  # end-of-series; some usable, some skipped
        add(days[-3] + timedelta(days=rng.randrange(0, 9)))
    for _ in range(10):  # before series start
        add(days[0] - timedelta(days=rng.randrange(1, 9)))
    while len(headlines) < 2000:
        add(days[0] + timedelta(days=rng.randrange(-5, 368)))

    result = align_events(headlines, prices, horizon=3)
    naive_events, naive_skipped = oracles.naive_align(
        [(h.id, h.timestamp.date(), h.ticker) for h in headlines],
        flat_bars,
        horizon=3,
    )
    got = [
        (e.headline.id, e.entry_date, e.entry_close, e.forward_date,
         e.forward_close, e.forward_return)
        for e in result.events
    ]
    assert got == naive_events
    assert [sid for sid, _ in result.skipped] == naive_skipped
    assert result.events and result.skipped  # both paths exercised
    assert len(result.events) + result.skip_tally == 2000
    _finish("alignment-oracle-equivalence", start, 5.0)


# 4. Backtester oracle equivalence: 1,000 synthetic events with mixed actions,
#    every report field within 1e-9 of the naive reference, budget < 1 s.
def test_backtester_oracle_equivalence():
    start = time.perf_counter()
    events, signals = corpus.random_scored_corpus(1000, n_tickers=8, seed=29)
    params = RewardParams()
    report = run_backtest(signals, events, params)
    by_id = {e.headline.id: e for e in events}
    naive = oracles.naive_backtest(
        [
            (s.event_id, by_id[s.event_id].headline.ticker,
             by_id[s.event_id].entry_date, s.score,
             by_id[s.event_id].forward_return)
            for s in signals
        ],
        params.signal_strength,
        params.action_threshold,
        params.movement_threshold,
        params.hold_reward,
    )
    assert {"long", "short", "hold"} == {
        k for k, v in report.trade_counts.items() if v > 0
    }  # mixed actions actually present
    assert_report_matches_naive(report, naive, tol=1e-9)
    _finish("backtester-oracle-equivalence", start, 1.0)


# 5. Pipeline determinism: ingest -> signals(replay) -> backtest run twice on
#    the same fixtures is byte-identical (manifests excluded), budget < 10 s.
def test_cli_pipeline_determinism(tmp_path):
    start = time.perf_counter()
    headlines, prices, signals = corpus.planted_corpus(
        n_tickers=4, events_per_ticker=8, seed=11
    )
    headlines_csv = tmp_path / "headlines.csv"
    prices_csv = tmp_path / "prices.csv"
    replay = tmp_path / "replay.jsonl"
    corpus.write_headlines_csv(headlines_csv, headlines)
    corpus.write_prices_csv(prices_csv, prices)
    write_signals_jsonl(signals, replay)
    input_digests = [sha256_file(p) for p in (headlines_csv, prices_csv, replay)]

    outputs = []
    for name in ("run_a", "run_b"):
        run_dir = tmp_path / name
        run_dir.mkdir()
        events = run_dir / "events.jsonl"
        scored = run_dir / "signals.jsonl"
        assert run_cli(["ingest", "--headlines", headlines_csv,
                        "--prices", prices_csv, "--out", events]) == 0
        assert run_cli(["signals", "--events", events, "--source", "replay",
                        "--replay-file", replay, "--out", scored]) == 0
        assert run_cli(["backtest", "--events", events, "--signals", scored,
                        "--out-dir", run_dir / "bt"]) == 0
        outputs.append(
            tuple(
                path.read_bytes()
                for path in (
                    events, scored,
                    run_dir / "bt" / "report.json",
                    run_dir / "bt" / "curves.csv",
                    run_dir / "bt" / "summary.csv",
                )
            )
        )
    assert outputs[0] == outputs[1]
    assert [sha256_file(p) for p in (headlines_csv, prices_csv, replay)] == input_digests
    _finish("cli-pipeline-determinism", start, 10.0)


# 6. Calibration improvement on the planted corpus (score sign matches return
#    sign, |R| = 0.05 exactly): calibrated training mean reward >= the
#    default-parameter mean reward, and best theta <= 0.05. Budget < 10 s.
def test_calibration_improvement_planted_corpus():
    start = time.perf_counter()
    headlines, prices, signals = corpus.planted_corpus(
        n_tickers=10, events_per_ticker=20, seed=7
    )
    events = align_events(headlines, prices, horizon=3).events
    assert len(events) == 200
    assert all(abs(abs(e.forward_return) - 0.05) <= 1e-15 for e in events)
    result = grid_calibrate(events, signals, CalibrationGrid(), 10)
    default_mean = batch_rewards(signals, events, RewardParams()).mean_reward
    assert result.best_mean_reward >= default_mean - 1e-12
    assert result.best_params.movement_threshold <= 0.05
    _finish("calibration-improvement", start, 10.0)


# 7. Dispersion under calibrated parameters is not wider than under maximally
#    permissive parameters (tau=1, theta=0) on the planted corpus with 20%
#    label noise. Qualitative inequality, budget < 10 s.
def test_calibrated_dispersion_not_wider():
    start = time.perf_counter()
    noise_counts = [8, 8, 8, 8, 8, 0, 0, 0, 0, 0]  # 40 of 200 events = 20%
    headlines, prices, signals = corpus.planted_corpus(
        n_tickers=10, events_per_ticker=20, noise_counts=noise_counts, seed=7
    )
    events = align_events(headlines, prices, horizon=3).events
    calibrated = grid_calibrate(events, signals, CalibrationGrid(), 10).best_params
    permissive = RewardParams(
        signal_strength=10, action_threshold=1,
        movement_threshold=0.0, hold_reward=0.001,
    )
    calibrated_report = run_backtest(signals, events, calibrated)
    permissive_report = run_backtest(signals, events, permissive)
    assert calibrated_report.dispersion <= permissive_report.dispersion
    _finish("calibrated-dispersion-not-wider", start, 10.0)


# 8. Train/eval leakage guard: a deliberate one-event overlap is rejected.
#    Budget < 1 s.
def test_leakage_guard():
    start = time.perf_counter()
    headlines, prices, signals = corpus.planted_corpus(
        n_tickers=4, events_per_ticker=10, seed=13
    )
    events = align_events(headlines, prices, horizon=3).events
    half = len(events) // 2
    by_id = {s.event_id: s for s in signals}
    train, evaluation = events[:half], events[half:]
    train_signals = [by_id[e.headline.id] for e in train]
    calibration = grid_calibrate(train, train_signals, CalibrationGrid(), 10)

    leaky_events = evaluation + [train[0]]
    leaky_signals = [by_id[e.headline.id] for e in leaky_events]
    with pytest.raises(LeakageError):
        evaluate_params(leaky_events, leaky_signals, calibration)

    clean_mean, _ = evaluate_params(
        evaluation, [by_id[e.headline.id] for e in evaluation], calibration
    )
    assert clean_mean is not None
    _finish("leakage-guard", start, 1.0)
