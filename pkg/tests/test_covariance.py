import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sevensins.covariance import (
    ReturnSample,
    Verdict,
    clip_eigenvalues,
    demonstrate_exploit,
    diagnose,
    estimate_per_entry_ewma,
    estimate_sample_covariance,
    ewma_weights,
    shrink,
)
from sevensins.errors import (
    InsufficientData,
    KappaOutOfRange,
    NonFinite,
    NotIndefinite,
    ValidationError,
)
from sevensins.fixtures import ewma_trap_halflives, ewma_trap_returns
from sevensins.linalg import eigh

from conftest import random_spd


class TestReturnSample:
    def test_shape(self):
        s = ReturnSample(np.zeros((5, 3)))
        assert (s.periods, s.assets) == (5, 3)

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            ReturnSample([[0.0, np.nan], [0.0, 0.0]])


class TestSampleCovariance:
    def test_two_periods_by_hand(self):
        Q = estimate_sample_covariance(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        np.testing.assert_array_equal(Q.entries, [[2.0, 0.0], [0.0, 0.0]])

    def test_constant_column_has_zero_variance(self):
        r = np.random.default_rng(0).standard_normal((30, 3))
        r[:, 1] = 0.7
        assert estimate_sample_covariance(r).entries[1, 1] == pytest.approx(0.0, abs=1e-30)

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            estimate_sample_covariance(np.zeros((1, 2)))

    def test_monte_carlo_recovers_generator(self):
        sigma = np.array([[1.0, 0.3, -0.2], [0.3, 2.0, 0.5], [-0.2, 0.5, 1.5]])
        r = np.random.default_rng(2024).multivariate_normal(np.zeros(3), sigma, size=100_000)
        Q = estimate_sample_covariance(r).entries
        assert np.all(np.abs(Q - sigma) <= 0.05 * np.abs(sigma))

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(2, 12).flatmap(
            lambda t: arrays(np.float64, (t, 4), elements=st.floats(-1e3, 1e3, allow_nan=False))
        )
    )
    def test_positive_semidefinite(self, r):
        Q = estimate_sample_covariance(r)
        scale = max(1.0, float(np.max(np.abs(Q.entries))))
        assert eigh(Q).eigenvalues[-1] >= -1e-10 * scale


class TestPerEntryEwma:
    def test_weights_newest_heaviest(self):
        w = ewma_weights(4, 1.0)
        np.testing.assert_allclose(w, np.array([1 / 8, 1 / 4, 1 / 2, 1]) / (15 / 8))

    def test_equal_halflives_is_single_ewma(self):
        r = np.random.default_rng(1).standard_normal((50, 3))
        Q = estimate_per_entry_ewma(r, np.full((3, 3), 7.0)).entries
        w = ewma_weights(50, 7.0)
        c = r - w @ r
        np.testing.assert_allclose(Q, (c * w[:, None]).T @ c, atol=1e-15)
        assert eigh(Q).eigenvalues[-1] >= 0

    def test_scalar_halflife_broadcasts(self):
        r = np.random.default_rng(1).standard_normal((20, 2))
        assert estimate_per_entry_ewma(r, 4.0) == estimate_per_entry_ewma(r, np.full((2, 2), 4.0))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_mismatched_halflives_turn_indefinite(self, seed):
        Q = estimate_per_entry_ewma(ewma_trap_returns(seed), ewma_trap_halflives())
        assert diagnose(Q).verdict is Verdict.INDEFINITE

    def test_same_data_with_one_rate_is_positive_definite(self):
        Q = estimate_per_entry_ewma(ewma_trap_returns(0), 5.0)
        assert diagnose(Q).min_eigenvalue > 0

    def test_two_periods(self):
        Q = estimate_per_entry_ewma(np.array([[0.01, 0.02], [-0.01, 0.03]]), [[1.0, 3.0], [3.0, 2.0]])
        assert np.all(np.isfinite(Q.entries))
        assert np.array_equal(Q.entries, Q.entries.T)

    @pytest.mark.parametrize("h", [[[1.0, 2.0], [3.0, 1.0]], [[1.0, -1.0], [-1.0, 1.0]]])
    def test_bad_halflives(self, h):
        with pytest.raises(ValidationError):
            estimate_per_entry_ewma(np.zeros((5, 2)), h)

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            estimate_per_entry_ewma(np.zeros((1, 2)), 5.0)


class TestDiagnose:
    def test_positive_definite(self, fig1_q):
        d = diagnose(fig1_q)
        assert d.verdict is Verdict.POSITIVE_DEFINITE
        assert d.min_eigenvalue == pytest.approx(0.1)
        assert d.condition_number == pytest.approx(3.0)
        assert d.offending_eigenvector is None

    def test_indefinite(self, indefinite_q):
        d = diagnose(indefinite_q)
        assert d.verdict is Verdict.INDEFINITE
        assert d.min_eigenvalue == pytest.approx(-1.0)
        assert d.condition_number == float("inf")
        r = 1 / np.sqrt(2)
        assert abs(d.offending_eigenvector @ np.array([r, -r])) == pytest.approx(1.0)

    def test_near_singular(self):
        d = diagnose(np.diag([1.0, 1e-8]))
        assert d.verdict is Verdict.NEAR_SINGULAR
        assert d.condition_number == pytest.approx(1e8)

    def test_threshold_is_configurable(self):
        assert diagnose(np.diag([1.0, 1e-8]), 1e9).verdict is Verdict.POSITIVE_DEFINITE

    def test_singular_psd_is_near_singular(self):
        assert diagnose(np.diag([1.0, 0.0])).verdict is Verdict.NEAR_SINGULAR

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            diagnose([[np.nan, 0.0], [0.0, 1.0]])

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (3, 3), elements=st.floats(-1, 1, allow_nan=False)).map(lambda a: (a + a.T) / 2))
    def test_verdict_matches_spectrum(self, a):
        d = diagnose(a)
        assert (d.verdict is Verdict.INDEFINITE) == (d.min_eigenvalue < 0)
        assert (d.verdict is Verdict.NEAR_SINGULAR) == (d.min_eigenvalue >= 0 and d.condition_number > 1e6)
        assert (d.offending_eigenvector is not None) == (d.verdict is Verdict.INDEFINITE)


class TestExploit:
    def test_toy_matrix(self, indefinite_q):
        rep = demonstrate_exploit(indefinite_q, [1.0, 0.0], 1.0, 10.0)
        np.testing.assert_allclose(rep.position, 10 * np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-13)
        assert rep.claimed_variance == pytest.approx(-100.0, rel=1e-12)
        assert rep.expected_return == pytest.approx(10 / np.sqrt(2), rel=1e-12)

    def test_large_scale(self, indefinite_q):
        rep = demonstrate_exploit(indefinite_q, [1.0, 0.0], 1.0, 1000.0)
        assert rep.claimed_variance == pytest.approx(-1e6, rel=1e-12)
        assert rep.expected_return == pytest.approx(707.1, rel=1e-4)

    @pytest.mark.parametrize("tau", [1.0, 10.0, 1000.0])
    def test_claim_matches_quadratic_form(self, indefinite_q, tau):
        rep = demonstrate_exploit(indefinite_q, [1.0, 0.0], 1.0, tau)
        assert rep.position @ indefinite_q @ rep.position == pytest.approx(rep.claimed_variance, rel=1e-12)

    def test_sign_follows_mu(self, indefinite_q):
        rep = demonstrate_exploit(indefinite_q, [0.0, 1.0], 1.0, 1.0)
        assert rep.expected_return > 0

    def test_positive_definite_has_nothing_to_exploit(self, fig1_q):
        with pytest.raises(NotIndefinite):
            demonstrate_exploit(fig1_q, [1.0, 0.0], 1.0, 1.0)

    def test_tau_must_be_positive(self, indefinite_q):
        with pytest.raises(ValidationError):
            demonstrate_exploit(indefinite_q, [1.0, 0.0], 1.0, 0.0)

    def test_scaling_law_on_estimated_matrix(self):
        r = ewma_trap_returns(0)
        Q = estimate_per_entry_ewma(r, ewma_trap_halflives())
        mu = r.mean(axis=0)
        reps = [demonstrate_exploit(Q, mu, 1e-4, t) for t in (1.0, 3.0, 50.0)]
        ret = [rep.expected_return / rep.scale for rep in reps]
        var = [rep.claimed_variance / rep.scale**2 for rep in reps]
        np.testing.assert_allclose(ret, ret[0], rtol=1e-12)
        np.testing.assert_allclose(var, var[0], rtol=1e-12)
        assert var[0] < 0 and ret[0] >= 0


class TestShrink:
    def test_kappa_one_is_identity_map(self, fig1_q):
        np.testing.assert_array_equal(shrink(fig1_q, 1.0).entries, fig1_q)

    def test_kappa_zero_gives_identity(self, fig1_q):
        np.testing.assert_array_equal(shrink(fig1_q, 0.0).entries, np.eye(2))

    def test_negative_eigenvalue_lifted(self):
        Q = np.diag([1.0, -0.2])
        np.testing.assert_allclose(eigh(shrink(Q, 0.5)).eigenvalues, [1.0, 0.4], atol=1e-15)

    @pytest.mark.parametrize("kappa", [-0.1, 1.1, np.nan])
    def test_out_of_range(self, fig1_q, kappa):
        with pytest.raises(KappaOutOfRange):
            shrink(fig1_q, kappa)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.5, 0.9]))
    def test_spectrum_map_and_eigenvectors(self, seed, kappa):
        rng = np.random.default_rng(seed)
        Q = random_spd(rng, int(rng.integers(2, 10)))
        before, after = eigh(Q), eigh(shrink(Q, kappa))
        np.testing.assert_allclose(after.eigenvalues, (1 - kappa) + kappa * before.eigenvalues, atol=1e-10, rtol=0)
        overlap = np.abs(np.sum(before.eigenvectors * after.eigenvectors, axis=0))
        assert np.all(np.abs(overlap - 1) <= 1e-8)


class TestClip:
    def test_no_op_when_above_floor(self, fig1_q):
        np.testing.assert_allclose(clip_eigenvalues(fig1_q, 0.05).entries, fig1_q, atol=1e-10)

    def test_toy_matrix_rank_one(self, indefinite_q):
        np.testing.assert_allclose(clip_eigenvalues(indefinite_q, 0.0).entries, np.full((2, 2), 1.5), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(clip_eigenvalues(np.diag([1.0, 1e-8]), 1e-4).entries, np.diag([1.0, 1e-4]), atol=1e-15)

    def test_negative_floor(self, fig1_q):
        with pytest.raises(ValidationError):
            clip_eigenvalues(fig1_q, -1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(np.float64, (4, 4), elements=st.floats(-1, 1, allow_nan=False)).map(lambda a: (a + a.T) / 2),
        st.floats(0.0, 0.5),
    )
    def test_floor_respected_and_idempotent(self, a, floor):
        once = clip_eigenvalues(a, floor)
        assert eigh(once).eigenvalues[-1] >= floor - 1e-10
        twice = clip_eigenvalues(once, floor)
        np.testing.assert_allclose(twice.entries, once.entries, atol=1e-10)
