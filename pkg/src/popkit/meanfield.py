"""Mean-field limit of a protocol: quadratic drift, finite-n correction,
diffusion-approximation diagnostics, ODE integration, fixed points.

The drift is b(x) = sum_{q,q'} x_q x_{q'} B[q][q'] with integer tensor
B[q][q'] = -(e_q + e_{q'}) + e_{d1(q,q')} + e_{d2(q,q')}, and the finite-n
drift is b_n(x) = n/(n-1) * b(x) - 1/(n-1) * c(x) where c collects the
diagonal (same-agent-state) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .protocol import Configuration, ProtocolSpec
from .chain import pair_probability


@dataclass(frozen=True)
class MeanFieldSystem:
    states: tuple[str, ...]
    tensor: np.ndarray  # (k, k, k) int, B[q, q', r]
    correction: np.ndarray  # (k, k) int, c(x) = sum_q x_q * correction[q]

    @property
    def k(self) -> int:
        return len(self.states)

    def drift(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("q,p,qpr->r", x, x, self.tensor)

    def drift_exact(self, x: Sequence[Fraction]) -> list[Fraction]:
        k = self.k
        out = [Fraction(0)] * k
        for q in range(k):
            if x[q] == 0:
                continue
            for p in range(k):
                if x[p] == 0:
                    continue
                w = x[q] * x[p]
                for r in range(k):
                    t = int(self.tensor[q, p, r])
                    if t:
                        out[r] += w * t
        return out

    def correction_exact(self, x: Sequence[Fraction]) -> list[Fraction]:
        k = self.k
        out = [Fraction(0)] * k
        for q in range(k):
            if x[q] == 0:
                continue
            for r in range(k):
                t = int(self.correction[q, r])
                if t:
                    out[r] += x[q] * t
        return out


def derive_drift(spec: ProtocolSpec) -> MeanFieldSystem:
    k = spec.n_states
    idx = {q: i for i, q in enumerate(spec.states)}
    tensor = np.zeros((k, k, k), dtype=np.int64)
    correction = np.zeros((k, k), dtype=np.int64)
    for q in spec.states:
        for qp in spec.states:
            r, rp = spec.rules[(q, qp)]
            vec = np.zeros(k, dtype=np.int64)
            vec[idx[q]] -= 1
            vec[idx[qp]] -= 1
            vec[idx[r]] += 1
            vec[idx[rp]] += 1
            tensor[idx[q], idx[qp]] = vec
    for q in spec.states:
        r, rp = spec.rules[(q, q)]
        vec = np.zeros(k, dtype=np.int64)
        vec[idx[q]] -= 2
        vec[idx[r]] += 1
        vec[idx[rp]] += 1
        correction[idx[q]] = vec
    return MeanFieldSystem(states=spec.states, tensor=tensor, correction=correction)


def drift_finite_n(system: MeanFieldSystem, n: int, x) -> np.ndarray:
    """b_n(x) = n/(n-1) b(x) - 1/(n-1) c(x).

    Accepts float arrays or exact Fractions (returned as a list then).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if len(x) and isinstance(x[0], Fraction):
        b = system.drift_exact(x)
        c = system.correction_exact(x)
        return [
            Fraction(n, n - 1) * bi - Fraction(1, n - 1) * ci for bi, ci in zip(b, c)
        ]
    x = np.asarray(x, dtype=float)
    b = system.drift(x)
    c = x @ system.correction
    return (n / (n - 1)) * b - c / (n - 1)


@dataclass(frozen=True)
class DiffusionDiagnostics:
    drift: list  # b_n(x) in proportion coordinates, exact Fractions
    covariance: list  # a_n(x) = n E[(dY)(dY)^T], exact Fractions
    third_moment: float  # K_n(x) = n E[||dY||^3]
    tail_mass: Fraction  # Delta_eps_n(x), exact
    max_jump: float  # max ||dY|| over reachable pairs
    epsilon: Fraction
    n: int

    def drift_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.drift])

    def covariance_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.covariance])


def diffusion_diagnostics(
    spec: ProtocolSpec, c: Configuration, epsilon
) -> DiffusionDiagnostics:
    """Enumeration of the diffusion-approximation coefficients at c.

    Drift, covariance and tail mass come out as exact rationals (the tail
    threshold compares squared norms, so no square roots are needed).
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    k = spec.n_states
    idx = {q: i for i, q in enumerate(spec.states)}
    n = c.n
    drift = [Fraction(0)] * k
    cov = [[Fraction(0)] * k for _ in range(k)]
    third = 0.0
    tail = Fraction(0)
    max_jump_sq = Fraction(0)
    eps_sq = epsilon * epsilon
    for q in spec.states:
        for qp in spec.states:
            w = pair_probability(c, q, qp)
            if w == 0:
                continue
            r, rp = spec.rules[(q, qp)]
            dy = [Fraction(0)] * k
            dy[idx[q]] -= Fraction(1, n)
            dy[idx[qp]] -= Fraction(1, n)
            dy[idx[r]] += Fraction(1, n)
            dy[idx[rp]] += Fraction(1, n)
            norm_sq = sum(v * v for v in dy)
            for i in range(k):
                if dy[i] == 0:
                    continue
                drift[i] += w * dy[i]
                for j in range(k):
                    cov[i][j] += w * dy[i] * dy[j]
            third += float(w) * float(norm_sq) ** 1.5
            if norm_sq > eps_sq:
                tail += w
            max_jump_sq = max(max_jump_sq, norm_sq)
    return DiffusionDiagnostics(
        drift=[n * v for v in drift],
        covariance=[[n * v for v in row] for row in cov],
        third_moment=n * third,
        tail_mass=n * tail,
        max_jump=float(max_jump_sq) ** 0.5,
        epsilon=epsilon,
        n=n,
    )


class LeftSimplexError(Exception):
    """An RK4 step produced a coordinate below -1e-9 (dt too large)."""


def integrate_ode(
    system: MeanFieldSystem, x0, t_end: float, dt: float = 1e-3
) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4 for dx/dt = b(x).

    The drift conserves the coordinate sum identically, so no simplex
    renormalization is applied; any deviation is roundoff.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    x = np.asarray(x0, dtype=float)
    if abs(x.sum() - 1.0) > 1e-9 or (x < -1e-12).any():
        raise ValueError("x0 must lie on the unit simplex")
    steps = int(round(t_end / dt))
    ts = np.empty(steps + 1)
    xs = np.empty((steps + 1, len(x)))
    ts[0], xs[0] = 0.0, x
    f = system.drift
    for k in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (x < -1e-9).any():
            raise LeftSimplexError(
                f"left simplex at t={(k + 1) * dt:.6g}; reduce dt"
            )
        ts[k + 1] = (k + 1) * dt
        xs[k + 1] = x
    return ts, xs


@dataclass(frozen=True)
class FixedPointReport:
    point: np.ndarray
    eigenvalues: np.ndarray  # simplex-restricted Jacobian spectrum
    classification: str  # stable / unstable / marginal / boundary-* / degenerate
    exact_point: Optional[object] = None  # Surd for 2-state interior roots


def _restricted_jacobian(system: MeanFieldSystem, x: np.ndarray) -> np.ndarray:
    """Jacobian of b at x projected onto the sum-zero tangent space."""
    k = system.k
    jac = np.zeros((k, k))
    for r in range(k):
        jac[r] = (system.tensor[:, :, r] + system.tensor[:, :, r].T) @ x
    # tangent basis: e_i - e_k for i < k
    basis = np.zeros((k, k - 1))
    for i in range(k - 1):
        basis[i, i] = 1.0
        basis[k - 1, i] = -1.0
    # pseudo-inverse of the basis gives the projection of coordinates
    return np.linalg.pinv(basis) @ jac @ basis


def _classify_eigs(eigs: np.ndarray) -> str:
    real = eigs.real
    if (real < -1e-8).all():
        return "stable"
    if (real > 1e-8).any():
        return "unstable"
    return "marginal"


def two_state_drift_coefficients(system: MeanFieldSystem) -> tuple[int, int, int]:
    """Integer (a, b, c) with the coordinate-0 drift restricted to the
    simplex equal to a*p^2 + b*p + c."""
    if system.k != 2:
        raise ValueError("requires a 2-state system")
    t = system.tensor[:, :, 0]
    return (
        int(t[0, 0] - t[0, 1] - t[1, 0] + t[1, 1]),
        int(t[0, 1] + t[1, 0] - 2 * t[1, 1]),
        int(t[1, 1]),
    )


def _two_state_fixed_points(system: MeanFieldSystem) -> list[FixedPointReport]:
    from .surd import Surd, quadratic_roots

    a, b, c = two_state_drift_coefficients(system)
    if a == 0 and b == 0 and c == 0:
        return [
            FixedPointReport(
                point=np.array([0.5, 0.5]),
                eigenvalues=np.array([0.0]),
                classification="degenerate: b == 0",
            )
        ]
    roots = quadratic_roots(a, b, c) if (a, b) != (0, 0) else []
    reports = []
    for root in roots:
        if root < 0 or root > 1:
            continue
        p = float(root)
        deriv = 2 * a * float(root) + b
        if root > 0 and root < 1:
            cls = _classify_eigs(np.array([deriv + 0j]))
        else:
            # boundary root: absorbing when the one-sided drift points at it
            interior_sign = _drift_sign_inside(a, b, c, at_zero=(root == 0))
            toward = (root == 0 and interior_sign < 0) or (
                root == Surd(1) and interior_sign > 0
            )
            cls = "boundary-absorbing" if toward else "boundary-repelling"
        reports.append(
            FixedPointReport(
                point=np.array([p, 1.0 - p]),
                eigenvalues=np.array([deriv + 0j]),
                classification=cls,
                exact_point=root,
            )
        )
    return reports


def _drift_sign_inside(a: int, b: int, c: int, at_zero: bool) -> int:
    # sign of aX^2+bX+c just inside the boundary root
    eps = Fraction(1, 10**6)
    x = eps if at_zero else 1 - eps
    val = a * x * x + b * x + c
    return (val > 0) - (val < 0)


def fixed_points(
    system: MeanFieldSystem, grid_resolution: int = 8, tol: float = 1e-10
) -> list[FixedPointReport]:
    """Fixed points of the simplex-restricted drift.

    2-state systems are solved in closed form (exact surds); larger systems
    use damped Newton from a deterministic interior grid.
    """
    if system.k == 2:
        return _two_state_fixed_points(system)
    if not system.tensor.any():
        return [
            FixedPointReport(
                point=np.full(system.k, 1.0 / system.k),
                eigenvalues=np.zeros(system.k - 1),
                classification="degenerate: b == 0",
            )
        ]
    found: list[np.ndarray] = []
    for start in _simplex_grid(system.k, grid_resolution):
        x = _newton(system, start, tol)
        if x is None:
            continue
        if any(np.max(np.abs(x - y)) < 1e-9 for y in found):
            continue
        found.append(x)
    reports = []
    for x in sorted(found, key=lambda v: tuple(np.round(v, 12))):
        eigs = np.linalg.eigvals(_restricted_jacobian(system, x))
        interior = (x > 1e-9).all()
        cls = _classify_eigs(eigs) if interior else "boundary"
        reports.append(
            FixedPointReport(point=x, eigenvalues=eigs, classification=cls)
        )
    return reports


def _simplex_grid(k: int, resolution: int):
    """Interior grid points with coordinates multiples of 1/resolution."""

    def rec(remaining: int, slots: int):
        if slots == 1:
            if remaining >= 1:
                yield (remaining,)
            return
        for v in range(1, remaining - slots + 2):
            for rest in rec(remaining - v, slots - 1):
                yield (v, *rest)

    for combo in rec(resolution, k):
        yield np.array(combo, dtype=float) / resolution


def _newton(
    system: MeanFieldSystem, x0: np.ndarray, tol: float, max_iter: int = 200
) -> Optional[np.ndarray]:
    k = system.k
    basis = np.zeros((k, k - 1))
    for i in range(k - 1):
        basis[i, i] = 1.0
        basis[k - 1, i] = -1.0
    x = x0.copy()
    res = np.linalg.norm(system.drift(x), np.inf)
    for _ in range(max_iter):
        if res < tol:
            break
        jac = np.zeros((k, k))
        for r in range(k):
            jac[r] = (system.tensor[:, :, r] + system.tensor[:, :, r].T) @ x
        jr = np.linalg.pinv(basis) @ jac @ basis
        fr = (np.linalg.pinv(basis) @ system.drift(x)).real
        try:
            step = np.linalg.solve(jr, -fr)
        except np.linalg.LinAlgError:
            return None
        damp = 1.0
        while damp > 1e-6:
            cand = x + damp * (basis @ step)
            cand_res = np.linalg.norm(system.drift(cand), np.inf)
            if cand_res < res:
                x, res = cand, cand_res
                break
            damp *= 0.5
        else:
            return None
    if res >= tol:
        return None
    if (x < -1e-9).any() or x.sum() - 1.0 > 1e-6:
        return None
    return np.clip(x, 0.0, 1.0)
