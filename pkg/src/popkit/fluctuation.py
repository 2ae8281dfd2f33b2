"""Ornstein-Uhlenbeck fluctuation analysis around interior fixed points.

Around an interior fixed point p*, the rescaled deviation
sqrt(n) * (p - p*) approaches an OU process with mean-reversion rate
theta = -(2 a p* + b) and noise variance q(p*); its stationary variance is
q / (2 theta).  This module computes those parameters exactly and
estimates their empirical counterparts from simulation ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import sim
from .atlas import INTERIOR, TwoStateRule, classify
from .sim import RescaledPath
from .surd import Surd

# finite-(n, t) tolerances, from estimator spread at M=200, n=1e4
VARIANCE_RTOL = 0.15
THETA_RTOL = 0.25


@dataclass(frozen=True)
class OUParams:
    theta: Surd  # mean-reversion rate, > 0
    sigma2: Surd  # noise variance, > 0
    stat_var: Surd  # stationary variance sigma2 / (2 theta)

    def __post_init__(self):
        if not (self.theta > Surd(0) and self.sigma2 > Surd(0)):
            raise ValueError("OU parameters must be positive")
        if self.stat_var != self.sigma2 / (Surd(2) * self.theta):
            raise ValueError("stationary variance inconsistent")


def theoretical_ou(rule: TwoStateRule) -> OUParams:
    cls = classify(rule)
    if cls.kind != INTERIOR:
        raise ValueError(f"rule {rule.as_tuple()} has no interior fixed point")
    return OUParams(
        theta=cls.theta, sigma2=cls.q_value, stat_var=cls.stationary_variance
    )


def estimate_variance(
    samples: Sequence[float], confidence: float = 0.95
) -> tuple[float, tuple[float, float]]:
    """Unbiased variance with a chi-square confidence interval."""
    samples = np.asarray(samples, dtype=float)
    m = len(samples)
    if m < 2:
        raise ValueError("need at least 2 samples")
    var = float(samples.var(ddof=1))
    from scipy.stats import chi2

    alpha = 1.0 - confidence
    lo = (m - 1) * var / chi2.ppf(1.0 - alpha / 2, m - 1)
    hi = (m - 1) * var / chi2.ppf(alpha / 2, m - 1)
    return var, (float(lo), float(hi))


class InsufficientSignalError(Exception):
    """Autocovariance unusable for a mean-reversion fit."""


def _deviation_matrix(paths, p_star: float, window, points: int):
    t0, t1 = window
    if t1 <= t0:
        raise ValueError("empty window")
    if isinstance(paths, RescaledPath):
        paths = [paths]
    grid = np.linspace(t0, t1, points)
    rows = []
    for path in paths:
        if path.ts[0] > t0 + 1e-12 or path.ts[-1] < t1 - 1e-12:
            raise ValueError("path does not cover the window")
        p = np.interp(grid, path.ts, path.values[:, 0])
        rows.append(math.sqrt(path.n) * (p - p_star))
    return grid, np.stack(rows)


def estimate_mean_reversion(
    paths,
    p_star: float,
    window: tuple[float, float],
    points: int = 2000,
) -> float:
    """Mean-reversion rate from a log-autocovariance regression.

    Accepts a single RescaledPath or a list (the autocovariance is then
    ensemble averaged).  The '+' state must be coordinate 0 of the paths.
    Fits log C(lag) against lag by least squares over lags up to a tenth
    of the window, and returns the negated slope.
    """
    grid, y = _deviation_matrix(paths, p_star, window, points)
    dt = grid[1] - grid[0]
    y = y - y.mean()
    max_lag = max(1, int((window[1] - window[0]) / 10.0 / dt))
    lags = np.arange(1, max_lag + 1)
    if len(lags) < 10:
        raise InsufficientSignalError("fewer than 10 usable lag points")
    cov = np.empty(len(lags))
    for i, lag in enumerate(lags):
        prod = y[:, :-lag] * y[:, lag:]
        cov[i] = prod.mean()
    if (cov <= 0).any():
        raise InsufficientSignalError("nonpositive autocovariance at a used lag")
    taus = lags * dt
    slope = np.polyfit(taus, np.log(cov), 1)[0]
    return float(-slope)


def synthetic_ou_path(
    theta: float,
    sigma2: float,
    x0: float,
    t_end: float,
    dt: float,
    seed: int,
    n: int = 1,
) -> RescaledPath:
    """Exact OU discretization, for estimator self-tests.

    Packaged as a RescaledPath with pseudo population size n so the
    estimators can consume it; values are stored as x / sqrt(n) + 0 so
    that sqrt(n) * (p - 0) recovers the OU state.
    """
    rng = sim.make_rng(seed)
    steps = int(round(t_end / dt))
    decay = math.exp(-theta * dt)
    sd = math.sqrt(sigma2 * (1.0 - decay * decay) / (2.0 * theta))
    xs = np.empty(steps + 1)
    xs[0] = x0
    noise = rng.standard_normal(steps)
    for k in range(steps):
        xs[k + 1] = decay * xs[k] + sd * noise[k]
    ts = np.arange(steps + 1) * dt
    values = (xs / math.sqrt(n)).reshape(-1, 1)
    return RescaledPath(n=n, ts=ts, values=values)


@dataclass(frozen=True)
class FluctuationReport:
    rule: TwoStateRule
    theoretical: OUParams
    empirical_var: float
    var_ci: tuple[float, float]
    empirical_mean: float
    theta_hat: Optional[float]
    m_samples: int
    config: dict
    verdicts: dict

    def to_json(self) -> dict:
        th = self.theoretical
        return {
            "rule": list(self.rule.as_tuple()),
            "theoretical": {
                "theta": float(th.theta),
                "sigma2": float(th.sigma2),
                "stat_var": float(th.stat_var),
                "stat_var_decimal": th.stat_var.decimal_str(50),
            },
            "empirical": {
                "var": self.empirical_var,
                "var_ci": list(self.var_ci),
                "mean": self.empirical_mean,
                "theta_hat": self.theta_hat,
            },
            "config": self.config,
            "verdicts": self.verdicts,
        }


def fluctuation_report(
    rule: TwoStateRule,
    n: int,
    m_runs: int,
    t_end: float,
    burn_in: float,
    seed: int,
    workers: int = 1,
    estimate_theta: bool = False,
    theta_runs: int = 50,
) -> FluctuationReport:
    """Compare empirical fluctuation statistics to the OU theory."""
    from .atlas import PLUS, realize

    if n < 100:
        raise ValueError("need n >= 100")
    if m_runs < 10:
        raise ValueError("need at least 10 runs")
    theory = theoretical_ou(rule)
    spec = realize(rule)
    cls = classify(rule)
    p_star = float(cls.p_star)
    samples = sim.fluctuation_samples(
        spec, PLUS, p_star, n, m_runs, t_end, burn_in, seed, workers=workers
    )
    var, ci = estimate_variance(samples)
    mean = float(samples.mean())
    se = math.sqrt(var / m_runs)
    theta_hat = None
    if estimate_theta:
        paths = ensemble_paths(
            spec, p_star, n, theta_runs, burn_in, t_end, seed, workers=workers
        )
        theta_hat = estimate_mean_reversion(paths, p_star, (burn_in, t_end))
    target = float(theory.stat_var)
    verdicts = {
        "variance": abs(var - target) <= VARIANCE_RTOL * target,
        "mean": abs(mean) <= 3.0 * se,
        "tolerances": {"variance_rtol": VARIANCE_RTOL, "theta_rtol": THETA_RTOL},
    }
    if theta_hat is not None:
        th = float(theory.theta)
        verdicts["theta"] = abs(theta_hat - th) <= THETA_RTOL * th
    return FluctuationReport(
        rule=rule,
        theoretical=theory,
        empirical_var=var,
        var_ci=ci,
        empirical_mean=mean,
        theta_hat=theta_hat,
        m_samples=m_runs,
        config={
            "n": n,
            "m_runs": m_runs,
            "t_end": t_end,
            "burn_in": burn_in,
            "seed": seed,
            "rng": sim.RNG_ID,
        },
        verdicts=verdicts,
    )


def ensemble_paths(
    spec,
    p_star: float,
    n: int,
    runs: int,
    t0: float,
    t1: float,
    seed: int,
    sample_dt: float = 0.01,
    workers: int = 1,
) -> list[RescaledPath]:
    """Independent rescaled paths sampled on a uniform grid of [0, t1].

    Uses a separate RNG stream from fluctuation_samples so the two sets of
    runs stay independent.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .sim import _kernel, _rule_tables, nearest_start_count

    pidx = 0
    i0 = nearest_start_count(n, p_star)
    counts0 = np.zeros(2, dtype=np.int64)
    counts0[pidx] = i0
    counts0[1 - pidx] = n - i0
    steps = math.floor(n * t1)
    stride = max(1, int(round(sample_dt * n)))
    ks = np.arange(0, steps + 1, stride, dtype=np.int64)
    if ks[-1] != steps:
        ks = np.append(ks, steps)
    d1, d2 = _rule_tables(spec)

    def run_one(m: int) -> np.ndarray:
        rng = sim.make_rng(seed, m, stream=1)
        records, _ = _kernel.run_pair_chain(counts0.copy(), d1, d2, steps, ks, rng)
        return records

    if workers <= 1:
        all_records = [run_one(m) for m in range(runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            all_records = list(ex.map(run_one, range(runs)))
    return [RescaledPath(n=n, ts=ks / n, values=rec / n) for rec in all_records]
