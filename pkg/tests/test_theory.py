"""Closed-form bound calculators against hand-computed vectors."""

import math

import numpy as np
import pytest

from specdyn.harmonics import OperatorEigs, operator_eigs
from specdyn.relu_net import TrainTrace
from specdyn.theory import (asymptotic_error_floor, bound_vs_trace,
                            concentration_eps, early_stop_T, overparam_floor,
                            quadratic_regime_floor, rate_constants, bounds_report)


def _synthetic_eigs(mu_top=1.5, mu_next=0.5, mult_top=1, mult_next=10):
    """Operator spectrum with chosen values; for arithmetic checks only."""
    return OperatorEigs(d=10, lam=4.0, biased=True, tol=1e-10,
                        entries=((0, mu_top, mult_top, 0.0),
                                 (1, mu_next, mult_next, 0.0)))


class TestConcentrationEps:
    def test_width_term_vanishes_for_huge_width(self):
        # hand value: sqrt(8 log 80 / 500) = 0.26478751132706789
        val = concentration_eps(500, 10**18, 0.05)
        assert val == pytest.approx(0.26478751416591410, abs=1e-12)
        assert val == pytest.approx(math.sqrt(8 * math.log(80) / 500), abs=3e-9)

    def test_sample_term_halves_when_n_quadruples(self):
        big_m = 10**30  # width term ~ 3e-15, negligible against the n term
        assert concentration_eps(4 * 500, big_m, 0.1) == pytest.approx(
            concentration_eps(500, big_m, 0.1) / 2, rel=1e-9)

    def test_unit_case_hand_value(self):
        # sqrt(log(4)/2) + sqrt(8 log 8) = 4.9112225718329336
        assert concentration_eps(1, 1, 0.5) == pytest.approx(4.9112225718329336,
                                                             abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            concentration_eps(0, 1, 0.1)
        with pytest.raises(ValueError):
            concentration_eps(1, 1, 1.5)


@pytest.mark.filterwarnings("ignore:.*concentration threshold.*:UserWarning")
class TestRateConstants:
    def test_floor_vanishes_in_the_limit(self):
        c0, c1 = rate_constants(_synthetic_eigs(), 1, eps_approx=0.0,
                                nu=0.0, n=10**20, delta=0.05)
        assert c1 <= 1e-8
        assert c0 == pytest.approx(0.75 * 1.5, abs=1e-15)

    def test_rate_tracks_operator_eigenvalue(self):
        eigs = operator_eigs(10, 4)
        c0, _ = rate_constants(eigs, 2, eps_approx=0.0, nu=0.01, n=10**6, delta=0.05)
        assert c0 == pytest.approx(0.75 * eigs.betas[1], rel=1e-12)

    def test_unit_gap_arithmetic_identity(self):
        # with log(2/delta) = 1, gap = 1, n = 128: c1 = 8 sqrt(2)/sqrt(128) = 1
        delta = 2.0 / math.e
        c0, c1 = rate_constants(_synthetic_eigs(), 1, eps_approx=0.0,
                                nu=0.0, n=128, delta=delta)
        assert c1 == pytest.approx(1.0, abs=1e-12)

    def test_epsilon_and_nu_terms(self):
        _, base = rate_constants(_synthetic_eigs(), 1, 0.0, 0.0, 100, 0.05)
        _, with_eps = rate_constants(_synthetic_eigs(), 1, 0.25, 0.0, 100, 0.05)
        _, with_nu = rate_constants(_synthetic_eigs(), 1, 0.0, 0.25, 100, 0.05)
        assert with_eps - base == pytest.approx(math.sqrt(2) * 0.25, abs=1e-12)
        assert with_nu - base == pytest.approx(2 * math.sqrt(2) * 0.25, abs=1e-12)

    def test_zero_gap_rejected(self):
        with pytest.raises(ValueError):
            rate_constants(_synthetic_eigs(mu_top=0.5, mu_next=0.5), 1,
                           0.0, 0.0, 100, 0.05)

    def test_small_n_warns(self):
        with pytest.warns(UserWarning):
            rate_constants(_synthetic_eigs(), 1, 0.0, 0.0, n=10, delta=0.05)


class TestOverparamFloor:
    def test_hand_computed_vector(self):
        # c0=0.5, c1=0.1, eta=1, T=10, nu=0.1, n=100, delta=0.05:
        # B = 1/0.5 + 2*10*0.1 = 4 exactly, so the first branch is
        # 3200 (16 log 4000 + 40000 * 256) = 328104655.34... -> 328104656
        assert overparam_floor(0.5, 0.1, 1.0, 10, 0.1, 100, 0.05) == 328104656

    def test_second_branch_dominates_for_huge_floor(self):
        # a huge floor c1 kills the 32/c1^2 branch only while eta T c1 stays
        # small (c1 also sits inside B = 1/c0 + 2 eta T c1), so shrink eta;
        # what remains is ceil((10/3)^2 log(2n/delta)) = ceil(92.156) = 93
        assert overparam_floor(0.5, 10**9, 1e-12, 1, 1.0, 100, 0.05) == 93

    def test_monotone_in_horizon(self):
        floors = [overparam_floor(0.5, 0.2, 1.0, T, 0.1, 100, 0.05)
                  for T in (1, 5, 20, 100)]
        assert all(a <= b for a, b in zip(floors, floors[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            overparam_floor(0.5, 0.1, 1.0, 10, 0.1, 100, 0.3)
        with pytest.raises(ValueError):
            overparam_floor(1.5, 0.1, 1.0, 10, 0.1, 100, 0.05)


class TestEarlyStop:
    def test_single_step_when_floor_matches_rate(self):
        assert early_stop_T(0.5, 0.5, 1.0) == 1   # c1 = 1 - eta c0

    def test_hand_value(self):
        # ceil(log 10 / log 1.6) = ceil(4.899) = 5
        assert early_stop_T(0.375, 0.1, 1.0) == 5

    def test_nonincreasing_in_rate(self):
        horizons = [early_stop_T(c0, 0.05, 1.0) for c0 in (0.1, 0.3, 0.6, 0.9)]
        assert all(a >= b for a, b in zip(horizons, horizons[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            early_stop_T(0.5, 1.5, 1.0)
        with pytest.raises(ValueError):
            early_stop_T(2.0, 0.1, 1.0)


@pytest.mark.filterwarnings("ignore:.*concentration threshold.*:UserWarning")
class TestAsymptoticFloor:
    def test_matches_doubled_leading_term(self):
        # with eps = nu = 0 the certified floor 2 c1 is exactly the
        # asymptotic expression 16 sqrt(2 log(2/delta)) / (sqrt(n) gap)
        eigs = _synthetic_eigs()
        for n in (128, 1000):
            for delta in (0.05, 0.2):
                _, c1 = rate_constants(eigs, 1, 0.0, 0.0, n, delta)
                assert asymptotic_error_floor(n, 1.0, delta) == pytest.approx(
                    2 * c1, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            asymptotic_error_floor(100, 0.0, 0.05)


class TestQuadraticRegime:
    def test_width_floor_scales_quadratically_at_large_n(self):
        # the floor is n^2 up to polylog factors; at n ~ 1e10 the polylog
        # contamination is inside 3%, so a decade in n multiplies the floor
        # by ~100
        eigs = operator_eigs(10, 3)
        lo = quadratic_regime_floor(10**10, eigs, 1)
        hi = quadratic_regime_floor(10**11, eigs, 1)
        assert 80 <= hi.m_min / lo.m_min <= 120

    def test_bundle_contents(self):
        eigs = operator_eigs(10, 3)
        b = quadratic_regime_floor(1000, eigs, 1)
        assert b.m_min >= 1 and b.T >= 1
        assert 0 < b.c0 < 1
        report = bounds_report(b)
        assert "c0=" in report and "m_min=" in report and "gap=" in report


class TestBoundVsTrace:
    @staticmethod
    def _trace(errs):
        errs = np.asarray(errs, dtype=float)
        return TrainTrace(eta=1.0, err_norm=errs, risk=errs**2 / 2,
                          flip_counts=np.zeros((len(errs), 1), dtype=int))

    def test_generous_floor_always_passes(self):
        # responses in [-1, 1] keep the normalized error near 1 at worst
        trace = self._trace([1.0, 0.9, 0.8])
        verdict = bound_vs_trace(trace, c0=0.5, c1=1.0, eta=1.0)
        assert verdict.passed

    def test_zero_error_trace_passes(self):
        verdict = bound_vs_trace(self._trace([0.0, 0.0]), 0.9, 1e-6, 1.0)
        assert verdict.passed

    def test_violation_located(self):
        verdict = bound_vs_trace(self._trace([0.5, 0.5, 0.5]), 0.99, 1e-9, 1.0)
        assert not verdict.passed
        assert verdict.first_violation == 1
        assert verdict.max_excess > 0
