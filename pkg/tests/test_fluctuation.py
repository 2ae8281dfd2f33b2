import math
from fractions import Fraction

import numpy as np
import pytest

from popkit.atlas import TwoStateRule
from popkit.fluctuation import (
    InsufficientSignalError,
    OUParams,
    estimate_mean_reversion,
    estimate_variance,
    fluctuation_report,
    synthetic_ou_path,
    theoretical_ou,
)
from popkit.surd import Surd

R2 = Surd.sqrt_of(2)
R5 = Surd.sqrt_of(5)


class TestTheory:
    def test_sqrt2_rule_exact(self):
        ou = theoretical_ou(TwoStateRule(-1, 1, 1))
        assert ou.theta == Surd(2) * R2
        assert ou.sigma2 == Surd(1)
        assert ou.stat_var == R2 / 8

    def test_golden_rule_exact(self):
        ou = theoretical_ou(TwoStateRule(-2, 1, 2))
        assert ou.theta == Surd(2) * R5
        assert ou.sigma2 == Surd(16) - Surd(6) * R5
        assert ou.stat_var == ou.sigma2 / (Surd(4) * R5)

    def test_monotone_rule_rejected(self):
        with pytest.raises(ValueError, match="no interior fixed point"):
            theoretical_ou(TwoStateRule(0, 1, 0))

    def test_identity_rejected(self):
        with pytest.raises(ValueError):
            theoretical_ou(TwoStateRule(0, 0, 0))

    def test_params_validated(self):
        with pytest.raises(ValueError):
            OUParams(theta=Surd(-1), sigma2=Surd(1), stat_var=Surd(1))
        with pytest.raises(ValueError, match="inconsistent"):
            OUParams(theta=Surd(2), sigma2=Surd(1), stat_var=Surd(1))

    def test_consistent_construction(self):
        ou = OUParams(
            theta=Surd(2), sigma2=Surd(1), stat_var=Surd(Fraction(1, 4))
        )
        assert float(ou.stat_var) == 0.25


class TestEstimateVariance:
    def test_two_point_sample(self):
        var, (lo, hi) = estimate_variance([-1.0, 1.0])
        assert var == 2.0
        assert lo < var < hi

    def test_constant_sample(self):
        var, _ = estimate_variance([3.0] * 10)
        assert var == 0.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(50)
        v1, ci1 = estimate_variance(x)
        v2, ci2 = estimate_variance(x + 100.0)
        assert v1 == pytest.approx(v2)
        assert ci1 == pytest.approx(ci2)

    def test_ci_coverage_shrinks(self):
        rng = np.random.default_rng(1)
        _, small = estimate_variance(rng.standard_normal(20))
        _, large = estimate_variance(rng.standard_normal(2000))
        assert (large[1] - large[0]) < (small[1] - small[0])

    def test_needs_two(self):
        with pytest.raises(ValueError):
            estimate_variance([1.0])

    def test_gaussian_calibration(self):
        # known-variance normal sample: estimate lands inside its own CI
        rng = np.random.default_rng(2)
        x = 3.0 * rng.standard_normal(500)
        var, (lo, hi) = estimate_variance(x)
        assert lo < 9.0 < hi
        assert var == pytest.approx(9.0, rel=0.25)


class TestMeanReversion:
    def test_synthetic_ou_recovery(self):
        theta = 2.0
        paths = [
            synthetic_ou_path(theta, 1.0, 0.0, 8.0, 0.005, seed=s)
            for s in range(64)
        ]
        theta_hat = estimate_mean_reversion(paths, 0.0, (2.0, 8.0))
        assert theta_hat == pytest.approx(theta, rel=0.2)

    def test_single_path_equals_singleton_list(self):
        path = synthetic_ou_path(2.0, 1.0, 0.0, 12.0, 0.002, seed=6)
        a = estimate_mean_reversion(path, 0.0, (2.0, 12.0), points=4000)
        b = estimate_mean_reversion([path], 0.0, (2.0, 12.0), points=4000)
        assert a == b

    def test_short_window_rejected(self):
        path = synthetic_ou_path(1.0, 1.0, 0.0, 10.0, 0.01, seed=0)
        with pytest.raises(InsufficientSignalError):
            estimate_mean_reversion(path, 0.0, (9.0, 9.5), points=30)

    def test_empty_window_rejected(self):
        path = synthetic_ou_path(1.0, 1.0, 0.0, 10.0, 0.01, seed=0)
        with pytest.raises(ValueError):
            estimate_mean_reversion(path, 0.0, (5.0, 5.0))

    def test_window_not_covered(self):
        path = synthetic_ou_path(1.0, 1.0, 0.0, 10.0, 0.01, seed=0)
        with pytest.raises(ValueError, match="cover"):
            estimate_mean_reversion(path, 0.0, (5.0, 20.0))

    def test_uncorrelated_noise_rejected(self):
        # white noise decorrelates immediately: log fit has no signal
        rng = np.random.default_rng(4)
        from popkit.sim import RescaledPath

        ts = np.linspace(0, 50, 5001)
        vals = rng.standard_normal((5001, 1))
        path = RescaledPath(n=1, ts=ts, values=vals)
        with pytest.raises(InsufficientSignalError):
            estimate_mean_reversion(path, 0.0, (0.0, 50.0))


class TestSyntheticPath:
    def test_stationary_moments(self):
        theta, sigma2 = 2.0, 1.0
        path = synthetic_ou_path(theta, sigma2, 0.0, 400.0, 0.01, seed=7)
        x = path.values[5000:, 0]  # drop transient
        assert x.mean() == pytest.approx(0.0, abs=0.05)
        assert x.var() == pytest.approx(sigma2 / (2 * theta), rel=0.15)

    def test_deterministic(self):
        a = synthetic_ou_path(1.0, 1.0, 0.5, 5.0, 0.01, seed=9)
        b = synthetic_ou_path(1.0, 1.0, 0.5, 5.0, 0.01, seed=9)
        assert (a.values == b.values).all()


class TestReport:
    def test_small_report_structure(self):
        rep = fluctuation_report(
            TwoStateRule(-1, 1, 1),
            n=400,
            m_runs=24,
            t_end=3.0,
            burn_in=1.0,
            seed=13,
        )
        assert rep.m_samples == 24
        assert rep.var_ci[0] < rep.empirical_var < rep.var_ci[1]
        assert rep.theta_hat is None
        assert set(rep.verdicts) == {"variance", "mean", "tolerances"}
        j = rep.to_json()
        assert j["rule"] == [-1, 1, 1]
        assert j["theoretical"]["stat_var"] == pytest.approx(
            math.sqrt(2) / 8
        )
        assert j["theoretical"]["stat_var_decimal"].startswith("0.17677")
        assert j["config"]["seed"] == 13

    def test_report_with_theta(self):
        rep = fluctuation_report(
            TwoStateRule(-1, 1, 1),
            n=300,
            m_runs=12,
            t_end=4.0,
            burn_in=1.0,
            seed=5,
            estimate_theta=True,
            theta_runs=12,
        )
        assert rep.theta_hat is not None
        assert "theta" in rep.verdicts
        assert rep.theta_hat > 0

    def test_determinism(self):
        kw = dict(n=200, m_runs=12, t_end=2.0, burn_in=0.5, seed=3)
        a = fluctuation_report(TwoStateRule(-1, 1, 1), **kw)
        b = fluctuation_report(TwoStateRule(-1, 1, 1), **kw, workers=4)
        assert a.empirical_var == b.empirical_var
        assert a.empirical_mean == b.empirical_mean

    def test_input_validation(self):
        with pytest.raises(ValueError, match="n >= 100"):
            fluctuation_report(TwoStateRule(-1, 1, 1), 50, 20, 2.0, 1.0, 0)
        with pytest.raises(ValueError, match="10 runs"):
            fluctuation_report(TwoStateRule(-1, 1, 1), 200, 5, 2.0, 1.0, 0)
        with pytest.raises(ValueError):
            fluctuation_report(TwoStateRule(0, 1, 0), 200, 20, 2.0, 1.0, 0)
