import numpy as np
import pytest

from sevensins.backtest import (
    Analytic,
    Annealing,
    BacktestConfig,
    Clip,
    InteriorPoint,
    InvalidPolicy,
    PerEntryEwma,
    Shrink,
    cost_sweep,
    run_backtest,
    turnover_stats,
)
from sevensins.annealing import AnnealSchedule
from sevensins.errors import InsufficientData, InvalidCovariance, ValidationError
from sevensins.fixtures import ewma_trap_halflives, ewma_trap_returns, synthetic_returns

BUDGET = 4e-4


@pytest.fixture(scope="module")
def short_series():
    return synthetic_returns(periods=120).sample.values


def config(**kw):
    base = dict(estimation_window=40, risk_budget=BUDGET)
    base.update(kw)
    return BacktestConfig(**base)


class TestConfig:
    def test_defaults(self):
        c = BacktestConfig()
        assert c.policy_on_invalid is InvalidPolicy.REPAIR_AND_CONTINUE
        assert c.fallback_floor == 1e-8
        assert isinstance(c.solver, InteriorPoint)

    @pytest.mark.parametrize("kw", [{"estimation_window": 1}, {"rebalance_every": 0}, {"risk_budget": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            BacktestConfig(**kw)

    def test_analytic_with_costs_rejected(self):
        with pytest.raises(ValidationError):
            BacktestConfig(solver=Analytic(), costs=0.01)

    def test_cost_vector(self):
        assert BacktestConfig(costs=0.0).cost_vector(2) is None
        np.testing.assert_array_equal(BacktestConfig(costs=0.01).cost_vector(3), [0.01] * 3)
        with pytest.raises(ValidationError):
            BacktestConfig(costs=[0.01, -0.01]).cost_vector(2)


class TestRunBacktest:
    def test_zero_returns_stay_flat(self):
        report = run_backtest(np.zeros((30, 2)), config(estimation_window=10, costs=0.01))
        assert np.all(report.positions == 0) and np.all(report.turnover == 0)
        assert {e["status"] for e in report.solver_log} == {"ZeroMu"}

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            run_backtest(np.zeros((40, 2)), config())

    def test_report_shapes_and_identities(self, short_series):
        report = run_backtest(short_series, config(costs=0.001))
        k = 120 - 40
        assert report.positions.shape == (k, 2)
        for arr in (report.gross_returns, report.costs_paid, report.net_returns, report.turnover):
            assert arr.shape == (k,)
        np.testing.assert_array_equal(report.net_returns, report.gross_returns - report.costs_paid)
        assert np.all(report.turnover >= 0)
        assert len(report.diagnostics_log) == len(report.solver_log) == k

    def test_realized_return_uses_the_holding_period(self, short_series):
        report = run_backtest(short_series, config())
        np.testing.assert_allclose(report.gross_returns, np.sum(report.positions * short_series[40:], axis=1), rtol=1e-15)

    def test_analytic_positions_bind_the_budget(self, short_series):
        report = run_backtest(short_series, config(solver=Analytic()))
        for row, tau in enumerate(report.periods):
            window = short_series[tau - 40 : tau]
            Q = np.cov(window, rowvar=False)
            x = report.positions[row]
            assert abs(x @ Q @ x - BUDGET) <= 1e-8 * BUDGET

    def test_tiny_costs_match_costless(self, short_series):
        free = run_backtest(short_series, config(solver=Analytic()))
        tiny = run_backtest(short_series, config(costs=1e-12))
        assert np.max(np.abs(free.positions - tiny.positions)) <= 1e-6

    def test_interior_point_bitwise(self, short_series):
        a = run_backtest(short_series, config(costs=0.001))
        b = run_backtest(short_series, config(costs=0.001))
        assert a.positions.tobytes() == b.positions.tobytes()

    def test_annealing_reproducible(self, short_series):
        cfg = config(solver=Annealing(AnnealSchedule(steps_per_temperature=5, seed=11)))
        a, b = run_backtest(short_series[:60], cfg), run_backtest(short_series[:60], cfg)
        assert a.positions.tobytes() == b.positions.tobytes()

    def test_rebalance_every_holds_between_dates(self, short_series):
        report = run_backtest(short_series, config(rebalance_every=5))
        assert len(report.solver_log) == 16
        for start in range(0, 80, 5):
            assert np.all(report.positions[start : start + 5] == report.positions[start])

    def test_no_look_ahead(self, short_series):
        tau = 70
        shuffled = short_series.copy()
        shuffled[tau + 1 :] = np.random.default_rng(0).permutation(shuffled[tau + 1 :])
        a = run_backtest(short_series, config(costs=0.001))
        b = run_backtest(shuffled, config(costs=0.001))
        upto = tau - 40 + 1
        np.testing.assert_array_equal(a.positions[:upto], b.positions[:upto])

    def test_shrink_repair_applied(self, short_series):
        report = run_backtest(short_series, config(repair=Shrink(0.5)))
        assert report.diagnostics_log[0]["min_eigenvalue"] >= 0.5 - 1e-12


@pytest.fixture(scope="module")
def trap():
    return ewma_trap_returns(0)


class TestInvalidPolicy:
    def _cfg(self, policy, **kw):
        return BacktestConfig(
            estimation_window=399,
            estimator=PerEntryEwma(ewma_trap_halflives()),
            policy_on_invalid=policy,
            **kw,
        )

    def test_halt(self, trap):
        with pytest.raises(InvalidCovariance):
            run_backtest(trap, self._cfg(InvalidPolicy.HALT))

    def test_repair_logged(self, trap, caplog):
        report = run_backtest(trap, self._cfg(InvalidPolicy.REPAIR_AND_CONTINUE))
        assert report.diagnostics_log[0]["verdict"] == "Indefinite"
        assert report.diagnostics_log[0]["action"] == "repaired"
        assert "repaired" in caplog.text

    def test_skip(self, trap):
        report = run_backtest(trap, self._cfg(InvalidPolicy.SKIP_PERIOD))
        assert report.solver_log[0]["status"] == "Skipped"
        assert np.all(report.positions == 0)

    def test_configured_repair_prevents_the_event(self, trap):
        report = run_backtest(trap, self._cfg(InvalidPolicy.HALT, repair=Clip(1e-8)))
        assert report.diagnostics_log[0]["action"] == "none"


class TestTurnoverStats:
    def test_all_zero(self):
        s = turnover_stats(run_backtest(np.zeros((12, 2)), config(estimation_window=10)))
        assert (s.total_turnover, s.mean_turnover, s.max_turnover, s.total_costs) == (0, 0, 0, 0)

    def test_single_rebalance_by_hand(self):
        # One period of returns after the window; target position is forced by the data.
        r = np.array([[0.01, -0.01], [0.02, -0.03], [0.0, 0.0]])
        report = run_backtest(r, BacktestConfig(estimation_window=2, risk_budget=1e-4, costs=0.01))
        x = report.positions[0]
        s = turnover_stats(report)
        assert s.total_turnover == pytest.approx(np.abs(x).sum())
        assert s.total_costs == pytest.approx(0.01 * np.abs(x).sum())

    def test_mean_is_total_over_periods(self, short_series):
        report = run_backtest(short_series, config())
        s = turnover_stats(report)
        assert s.mean_turnover == pytest.approx(s.total_turnover / report.periods.shape[0])


def test_hand_turnover_example():
    from sevensins.backtest import BacktestReport

    report = BacktestReport(
        periods=np.array([1]),
        positions=np.array([[1.0, -1.0]]),
        gross_returns=np.array([0.05]),
        costs_paid=np.array([0.02]),
        net_returns=np.array([0.03]),
        turnover=np.array([2.0]),
        diagnostics_log=[],
        solver_log=[],
    )
    s = turnover_stats(report)
    assert s.total_turnover == 2.0 and s.total_costs == pytest.approx(0.02)


def test_cost_sweep_rows(short_series):
    rows = cost_sweep(short_series, config(), [0.0, 0.01])
    assert [r["cost_rate"] for r in rows] == [0.0, 0.01]
    assert rows[0]["total_costs"] == 0.0
    assert rows[0]["total_turnover"] > rows[1]["total_turnover"]


def test_report_to_dict_is_plain(short_series):
    d = run_backtest(short_series[:50], config()).to_dict()
    assert isinstance(d["positions"], list) and isinstance(d["net_returns"][0], float)
