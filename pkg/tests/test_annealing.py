import pytest

from sevensins.annealing import AnnealSchedule, SplitMix64, anneal, compare_solvers
from sevensins.conic_solver import Status, solve
from sevensins.errors import InfeasibleStart, ValidationError
from sevensins.models import MeanVarianceProblem, lift
from sevensins.sins import comparison_instances

GENEROUS = AnnealSchedule(cooling_factor=0.97, steps_per_temperature=100, step_scale=1.0, min_temperature=1e-4)


class TestSplitMix64:
    def test_reference_outputs(self):
        rng = SplitMix64(0)
        assert rng.next_u64() == 0xE220A8397B1DCDAF
        assert rng.next_u64() == 0x6E789E6AA1B965F4

    def test_uniform_range(self):
        rng = SplitMix64(123)
        u = [rng.uniform() for _ in range(1000)]
        assert 0.0 <= min(u) and max(u) < 1.0

    def test_normals_moments(self):
        z = SplitMix64(7).normals(20_000)
        assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03

    def test_seed_range(self):
        with pytest.raises(ValidationError):
            SplitMix64(-1)
        with pytest.raises(ValidationError):
            SplitMix64(1 << 64)


class TestSchedule:
    @pytest.mark.parametrize(
        "kwargs", [{"cooling_factor": 1.0}, {"initial_temperature": 0.0}, {"steps_per_temperature": 0}, {"seed": -1}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            AnnealSchedule(**kwargs)


class TestAnneal:
    def test_generous_schedule_gets_close(self, fig1_q):
        problem, _ = lift(MeanVarianceProblem([1.0, 1.0], fig1_q, 1.0))
        r = anneal(problem, GENEROUS)
        assert r.status is Status.HEURISTIC
        assert r.objective >= 0.95 * 2.58199

    def test_seeds_give_different_runs(self, fig1_q):
        problem, _ = lift(MeanVarianceProblem([1.0, 1.0], fig1_q, 1.0))
        a = anneal(problem, AnnealSchedule(seed=1))
        b = anneal(problem, AnnealSchedule(seed=2))
        assert a.x.tobytes() != b.x.tobytes()

    def test_same_seed_bitwise(self, fig1_q):
        problem, _ = lift(MeanVarianceProblem([1.0, 1.0], fig1_q, 1.0))
        a = anneal(problem, AnnealSchedule(seed=9))
        b = anneal(problem, AnnealSchedule(seed=9))
        assert a.x.tobytes() == b.x.tobytes() and a.objective == b.objective

    @pytest.mark.parametrize("flags", [{}, {"fully_invested": True}, {"long_only": True}])
    def test_outputs_are_feasible(self, fig1_q, flags):
        problem, _ = lift(MeanVarianceProblem([1.0, 0.4], fig1_q, 0.5, **flags))
        r = anneal(problem, AnnealSchedule(seed=3))
        assert problem.risk(r.x) <= 0.5 + 1e-9
        assert problem.max_violation(r.x) <= 1e-9
        assert r.objective <= solve(problem).objective * (1 + 1e-6)

    def test_infeasible_start(self, fig1_q):
        problem, _ = lift(MeanVarianceProblem([1.0, 1.0], fig1_q, 0.1, fully_invested=True))
        with pytest.raises(InfeasibleStart):
            anneal(problem)


class TestCompareSolvers:
    def test_random_instances(self):
        result = compare_solvers(comparison_instances(4, 6, seed=3), AnnealSchedule(), seeds=(1, 2, 3))
        assert result.instances == 4
        assert result.ip_deterministic
        assert result.annealing_gap_stddev_across_seeds > 0
        assert result.annealing_mean_gap >= -1e-9
        assert result.annealing_evaluations > result.ip_newton_steps

    def test_bad_tuning_gives_large_gap(self, fig1_q):
        problem, _ = lift(MeanVarianceProblem([1.0, 1.0], fig1_q, 1.0))
        bad = AnnealSchedule(cooling_factor=0.5, steps_per_temperature=1)
        assert compare_solvers([problem], bad, seeds=(1, 2)).annealing_mean_gap > 0.05
