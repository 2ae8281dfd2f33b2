"""Monte-Carlo simulation of protocols with deterministic seeding.

Interactions sample the ordered *state* pair directly from the encounter
probabilities (O(1) per step in the population size).  Per-run generator
keys are derived from (master seed, run index) with SplitMix64 avalanche
mixing and drive counter-based Philox streams, so results are
reproducible across platforms and independent of worker count.

The hot loop lives in a compiled Cython kernel when available, with a
bit-identical pure-Python fallback (set POPKIT_PURE_PYTHON=1 to force it).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .protocol import Configuration, ProtocolSpec

if os.environ.get("POPKIT_PURE_PYTHON"):
    from . import _kernel_py as _kernel
else:
    try:
        from . import _kernel  # type: ignore[no-redef]
    except ImportError:
        from . import _kernel_py as _kernel

BACKEND = _kernel.BACKEND
RNG_ID = "philox4x64/splitmix64"

_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_key(seed: int, run: int, stream: int = 0) -> int:
    """64-bit avalanche-mixed key for (seed, run, stream).

    The words are folded in sequentially (mix, xor, mix, ...) so the key
    is order-sensitive: (a, b) and (b, a) give unrelated streams.
    """
    h = _splitmix64(seed & _MASK)
    h = _splitmix64(h ^ (run & _MASK))
    h = _splitmix64(h ^ (stream & _MASK))
    return h


def make_rng(seed: int, run: int = 0, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(seed, run, stream)))


def _rule_tables(spec: ProtocolSpec) -> tuple[np.ndarray, np.ndarray]:
    k = spec.n_states
    idx = {q: i for i, q in enumerate(spec.states)}
    d1 = np.empty((k, k), dtype=np.int64)
    d2 = np.empty((k, k), dtype=np.int64)
    for q in spec.states:
        for qp in spec.states:
            r, rp = spec.rules[(q, qp)]
            d1[idx[q], idx[qp]] = idx[r]
            d2[idx[q], idx[qp]] = idx[rp]
    return d1, d2


def _counts_vector(spec: ProtocolSpec, c: Configuration) -> np.ndarray:
    return np.array([c.count(q) for q in spec.states], dtype=np.int64)


@dataclass(frozen=True)
class Trajectory:
    states: tuple[str, ...]
    n: int
    seed: int
    thin: int
    ks: np.ndarray  # recorded step indices, strictly increasing
    counts: np.ndarray  # (len(ks), k) int64

    def proportions(self) -> np.ndarray:
        return self.counts / self.n


@dataclass(frozen=True)
class RescaledPath:
    n: int
    ts: np.ndarray
    values: np.ndarray  # (len(ts), k) proportions

    def at(self, t: float) -> np.ndarray:
        """Piecewise-linear interpolation; exact at recorded times."""
        if t < self.ts[0] - 1e-12 or t > self.ts[-1] + 1e-12:
            raise ValueError(f"t={t} out of range [{self.ts[0]}, {self.ts[-1]}]")
        out = np.empty(self.values.shape[1])
        for j in range(self.values.shape[1]):
            out[j] = np.interp(t, self.ts, self.values[:, j])
        return out


@dataclass(frozen=True)
class EnsembleStats:
    states: tuple[str, ...]
    grid: np.ndarray
    mean: np.ndarray  # (len(grid), k)
    var: np.ndarray  # unbiased, (len(grid), k)
    m_runs: int


def default_thin(steps: int) -> int:
    return max(1, steps // 10_000)


def simulate(
    spec: ProtocolSpec,
    c0: Configuration,
    steps: int,
    seed: int,
    thin: int | None = None,
) -> Trajectory:
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    thin = default_thin(steps) if thin is None else thin
    if thin < 1:
        raise ValueError("thin must be >= 1")
    ks = list(range(0, steps + 1, thin))
    if ks[-1] != steps:
        ks.append(steps)
    record_ks = np.asarray(ks, dtype=np.int64)
    counts = _counts_vector(spec, c0)
    d1, d2 = _rule_tables(spec)
    records, _ = _kernel.run_pair_chain(
        counts, d1, d2, steps, record_ks, make_rng(seed)
    )
    return Trajectory(
        states=spec.states,
        n=c0.n,
        seed=seed,
        thin=thin,
        ks=record_ks,
        counts=records,
    )


def rescale(traj: Trajectory) -> RescaledPath:
    """Rescaled time t = k/n with linear interpolation between samples."""
    if len(traj.ks) == 0:
        raise ValueError("empty trajectory")
    return RescaledPath(
        n=traj.n, ts=traj.ks / traj.n, values=traj.counts / traj.n
    )


def _run_one(args):
    spec, counts0, steps, record_ks, seed, run, stop = args
    d1, d2 = _rule_tables(spec)
    rng = make_rng(seed, run)
    records, done = _kernel.run_pair_chain(
        counts0.copy(), d1, d2, steps, record_ks, rng, stop
    )
    return records, done


def _map_runs(tasks, workers: int):
    if workers <= 1:
        return [_run_one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, tasks))


def ensemble(
    spec: ProtocolSpec,
    c0: Configuration,
    horizon_t: float,
    m_runs: int,
    seed: int,
    grid,
    workers: int = 1,
) -> EnsembleStats:
    """Per-time mean and unbiased variance of proportions across runs.

    Runs are reduced in run-index order, so results do not depend on
    scheduling or worker count.
    """
    if m_runs < 2:
        raise ValueError("need at least 2 runs")
    if horizon_t <= 0:
        raise ValueError("horizon must be positive")
    grid = np.asarray(sorted(grid), dtype=float)
    if (grid < 0).any() or (grid > horizon_t + 1e-12).any():
        raise ValueError("grid points must lie in [0, horizon]")
    n = c0.n
    steps = math.ceil(horizon_t * n)
    grid_ks = np.minimum(np.floor(grid * n).astype(np.int64), steps)
    record_ks, inverse = np.unique(grid_ks, return_inverse=True)
    counts0 = _counts_vector(spec, c0)
    tasks = [
        (spec, counts0, steps, record_ks, seed, m, False) for m in range(m_runs)
    ]
    results = _map_runs(tasks, workers)
    props = np.stack([rec / n for rec, _ in results])  # (M, nrec, k)
    props = props[:, inverse, :]  # back onto the requested grid
    return EnsembleStats(
        states=spec.states,
        grid=grid,
        mean=props.mean(axis=0),
        var=props.var(axis=0, ddof=1),
        m_runs=m_runs,
    )


def nearest_start_count(n: int, p_star: float) -> int:
    """floor(n p*) or ceil(n p*), whichever is closer; ties toward floor."""
    lo = math.floor(n * p_star)
    hi = lo + 1
    if hi > n or (n * p_star - lo) <= (hi - n * p_star):
        return lo
    return hi


def fluctuation_samples(
    spec: ProtocolSpec,
    plus_state: str,
    p_star: float,
    n: int,
    m_runs: int,
    t_end: float,
    burn_in: float,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """M independent values of sqrt(n) * (p(floor(n t_end)) - p*)."""
    if spec.n_states != 2:
        raise ValueError("fluctuation sampling requires a 2-state protocol")
    if not (0 < p_star < 1):
        raise ValueError("p_star must be in (0, 1)")
    if burn_in >= t_end:
        raise ValueError("burn_in must be below t_end")
    pidx = spec.state_index(plus_state)
    i0 = nearest_start_count(n, p_star)
    counts0 = np.zeros(2, dtype=np.int64)
    counts0[pidx] = i0
    counts0[1 - pidx] = n - i0
    steps = math.floor(n * t_end)
    record_ks = np.asarray([steps], dtype=np.int64)
    tasks = [
        (spec, counts0, steps, record_ks, seed, m, False) for m in range(m_runs)
    ]
    results = _map_runs(tasks, workers)
    finals = np.array([rec[0, pidx] for rec, _ in results], dtype=np.int64)
    return math.sqrt(n) * (finals / n - p_star)


def run_to_absorption(
    spec: ProtocolSpec,
    c0: Configuration,
    max_steps: int,
    seed: int,
    run: int = 0,
) -> tuple[np.ndarray, int, bool]:
    """Simulate until the configuration stops changing or max_steps.

    Returns (final counts, steps done, absorbed flag).
    """
    counts = _counts_vector(spec, c0)
    d1, d2 = _rule_tables(spec)
    record_ks = np.asarray([max_steps], dtype=np.int64)
    records, done = _kernel.run_pair_chain(
        counts, d1, d2, max_steps, record_ks, make_rng(seed, run), True
    )
    return records[0], done, done < max_steps


def trajectory_csv(traj: Trajectory) -> str:
    header = "k,t," + ",".join(traj.states)
    lines = [header]
    for k, row in zip(traj.ks, traj.counts):
        props = ",".join(f"{v / traj.n:.15g}" for v in row)
        lines.append(f"{k},{k / traj.n:.15g},{props}")
    return "\n".join(lines) + "\n"


def ensemble_csv(stats: EnsembleStats) -> str:
    lines = ["t,state,mean,var,m_runs"]
    for gi, t in enumerate(stats.grid):
        for si, st in enumerate(stats.states):
            lines.append(
                f"{t:.15g},{st},{stats.mean[gi, si]:.15g},"
                f"{stats.var[gi, si]:.15g},{stats.m_runs}"
            )
    return "\n".join(lines) + "\n"


def run_metadata(spec: ProtocolSpec, n: int, seed: int, thin: int | None) -> dict:
    return {
        "protocol_hash": spec.content_hash(),
        "n": n,
        "seed": seed,
        "rng": RNG_ID,
        "backend": BACKEND,
        "thin": thin,
    }
