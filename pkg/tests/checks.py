"""Shared helpers: CLI invocation and report-versus-oracle comparisons."""

from __future__ import annotations

from rlmf_harness.cli import main as cli_main


def run_cli(argv: list[str]) -> int:
    """Run the CLI in-process, normalizing argparse's SystemExit to a code."""
    try:
        return cli_main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1


def assert_report_matches_naive(report, naive, tol: float = 1e-9) -> None:
    """Field-for-field comparison of a BacktestReport against the oracle dict."""
    assert set(report.per_ticker_series) == set(naive["per_ticker_series"])
    for ticker, got in report.per_ticker_series.items():
        want = naive["per_ticker_series"][ticker]
        assert len(got) == len(want), f"series length mismatch for {ticker}"
        for (gd, gv), (wd, wv) in zip(got, want):
            assert gd == wd, f"date mismatch for {ticker}: {gd} != {wd}"
            assert abs(gv - wv) <= tol, f"value mismatch for {ticker} on {gd}"
    assert len(report.mean_eval_series) == len(naive["mean_eval_series"])
    for (gd, gv), (wd, wv) in zip(report.mean_eval_series, naive["mean_eval_series"]):
        assert gd == wd
        assert abs(gv - wv) <= tol
    if naive["win_rate"] is None:
        assert report.win_rate is None
    else:
        assert report.win_rate is not None
        assert abs(report.win_rate - naive["win_rate"]) <= tol
    assert report.trade_counts == naive["trade_counts"]
    assert abs(report.dispersion - naive["dispersion"]) <= tol
    assert abs(report.total_reward - naive["total_reward"]) <= tol
