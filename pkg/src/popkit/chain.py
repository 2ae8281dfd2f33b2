"""Exact finite-n Markov chains induced by a protocol under uniform pairing.

For 2-state protocols the population is fully described by the count of
agents in a designated '+' state, giving a chain on {0, ..., n} with jumps
bounded by 2.  Stationary distributions are solved exactly in rationals at
small n (product form on birth-death chains, Gaussian elimination
otherwise) and in floating point beyond.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .protocol import Configuration, ProtocolSpec

# exact-arithmetic limits: rationals stay cheap up to these sizes
EXACT_BIRTH_DEATH_MAX_N = 500
EXACT_GENERAL_MAX_N = 100


class ChainStructureError(Exception):
    """The chain has no unique closed communicating class."""

    def __init__(self, classes: list[list[int]]):
        self.classes = classes
        super().__init__(
            f"{len(classes)} closed communicating classes: {classes}"
        )


def pair_probability(c: Configuration, q: str, qp: str) -> Fraction:
    """Probability that a uniform ordered pair of distinct agents is (q, q')."""
    if c.n < 2:
        raise ValueError("need n >= 2")
    cq = c.count(q)
    cqp = c.count(qp) - (1 if q == qp else 0)
    return Fraction(cq * cqp, c.n * (c.n - 1))


def one_step_expectation(spec: ProtocolSpec, c: Configuration) -> dict[str, Fraction]:
    """Expected count increment per state after one interaction, exact.

    Computed by enumeration over all ordered state pairs weighted by their
    encounter probabilities.
    """
    delta = {q: Fraction(0) for q in spec.states}
    for q in spec.states:
        for qp in spec.states:
            w = pair_probability(c, q, qp)
            if w == 0:
                continue
            r, rp = spec.rules[(q, qp)]
            delta[q] -= w
            delta[qp] -= w
            delta[r] += w
            delta[rp] += w
    return delta


@dataclass(frozen=True)
class CountChainKernel:
    """One-step kernel of the '+'-count chain of a 2-state protocol."""

    n: int
    plus_state: str
    transition: Mapping[int, Mapping[int, Fraction]]

    def row(self, i: int) -> Mapping[int, Fraction]:
        return self.transition[i]

    def jump_states(self) -> set[int]:
        return set(self.transition)


def count_chain(spec: ProtocolSpec, plus_state: str, n: int) -> CountChainKernel:
    if spec.n_states != 2:
        raise ValueError(f"count chain requires exactly 2 states, got {spec.n_states}")
    if n < 2:
        raise ValueError("need n >= 2")
    if plus_state not in spec.states:
        raise ValueError(f"unknown state {plus_state!r}")
    minus_state = next(q for q in spec.states if q != plus_state)

    def dplus(q: str, qp: str) -> int:
        r, rp = spec.rules[(q, qp)]
        return (
            (r == plus_state)
            + (rp == plus_state)
            - (q == plus_state)
            - (qp == plus_state)
        )

    denom = n * (n - 1)
    transition: dict[int, dict[int, Fraction]] = {}
    for i in range(n + 1):
        cnt = {plus_state: i, minus_state: n - i}
        row: dict[int, Fraction] = {}
        for q in (plus_state, minus_state):
            for qp in (plus_state, minus_state):
                w = cnt[q] * (cnt[qp] - (1 if q == qp else 0))
                if w == 0:
                    continue
                j = i + dplus(q, qp)
                row[j] = row.get(j, Fraction(0)) + Fraction(w, denom)
        transition[i] = row
    return CountChainKernel(n=n, plus_state=plus_state, transition=transition)


@dataclass(frozen=True)
class StationaryResult:
    support: list[int]
    mu: list
    mean_fraction: object  # Fraction in exact mode, float otherwise
    exact: bool
    n: int
    absorbing: bool = False
    residual: float = 0.0


def _closed_classes(kernel: CountChainKernel) -> list[list[int]]:
    from scipy.sparse import lil_matrix
    from scipy.sparse.csgraph import connected_components

    n = kernel.n
    adj = lil_matrix((n + 1, n + 1), dtype=np.int8)
    for i, row in kernel.transition.items():
        for j, p in row.items():
            if p > 0:
                adj[i, j] = 1
    ncomp, labels = connected_components(adj.tocsr(), connection="strong")
    members: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        members.setdefault(int(lab), []).append(i)
    closed = []
    for lab, nodes in members.items():
        if all(
            labels[j] == lab
            for i in nodes
            for j, p in kernel.transition[i].items()
            if p > 0
        ):
            closed.append(sorted(nodes))
    closed.sort()
    return closed


def _is_birth_death(kernel: CountChainKernel, support: Sequence[int]) -> bool:
    sup = set(support)
    for i in support:
        for j, p in kernel.transition[i].items():
            if p > 0 and (j not in sup or abs(j - i) > 1):
                return False
    return True


def _product_form(kernel, support, exact: bool):
    mu = [Fraction(1) if exact else 1.0]
    for a, b in zip(support, support[1:]):
        up = kernel.transition[a].get(b, Fraction(0))
        down = kernel.transition[b].get(a, Fraction(0))
        if down == 0:
            raise ChainStructureError([list(support)])
        ratio = up / down if exact else float(up) / float(down)
        mu.append(mu[-1] * ratio)
    total = sum(mu)
    return [m / total for m in mu]


def _solve_exact(kernel, support):
    # mu P = mu with normalization; Gaussian elimination over rationals
    idx = {i: k for k, i in enumerate(support)}
    m = len(support)
    aug = [[Fraction(0)] * (m + 1) for _ in range(m)]
    for col, i in enumerate(support):
        # column equation: sum_j mu_j P[j, i] - mu_i = 0
        for j in support:
            p = kernel.transition[j].get(i, Fraction(0))
            aug[col][idx[j]] += p
        aug[col][idx[i]] -= 1
    # replace last equation with normalization
    aug[m - 1] = [Fraction(1)] * m + [Fraction(1)]
    for col in range(m):
        piv = next(r for r in range(col, m) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[k][m] for k in range(m)]


def _solve_float(kernel, support):
    idx = {i: k for k, i in enumerate(support)}
    m = len(support)
    a = np.zeros((m, m))
    for j in support:
        for i, p in kernel.transition[j].items():
            if i in idx:
                a[idx[i], idx[j]] += float(p)
    a -= np.eye(m)
    a[m - 1, :] = 1.0
    rhs = np.zeros(m)
    rhs[m - 1] = 1.0
    return list(np.linalg.solve(a, rhs))


def stationary_distribution(
    kernel: CountChainKernel, exact: Optional[bool] = None
) -> StationaryResult:
    """Stationary distribution on the unique closed communicating class.

    Raises ChainStructureError when there are several closed classes; a
    single absorbing count is reported as a point mass with absorbing=True.
    """
    closed = _closed_classes(kernel)
    if len(closed) != 1:
        raise ChainStructureError(closed)
    support = closed[0]
    n = kernel.n

    if len(support) == 1:
        i = support[0]
        mean = Fraction(i, n) if (exact is None or exact) else i / n
        return StationaryResult(
            support=support,
            mu=[Fraction(1) if (exact is None or exact) else 1.0],
            mean_fraction=mean,
            exact=exact is None or exact,
            n=n,
            absorbing=True,
        )

    birth_death = _is_birth_death(kernel, support)
    if exact is None:
        exact = n <= (EXACT_BIRTH_DEATH_MAX_N if birth_death else EXACT_GENERAL_MAX_N)

    if birth_death:
        mu = _product_form(kernel, support, exact)
    elif exact:
        mu = _solve_exact(kernel, support)
    else:
        mu = _solve_float(kernel, support)

    if exact:
        mean = sum(m * Fraction(i, n) for m, i in zip(mu, support))
    else:
        mean = float(sum(m * (i / n) for m, i in zip(mu, support)))

    residual = _balance_residual(kernel, support, mu)
    if exact and residual != 0:
        raise AssertionError("exact solve left a nonzero balance residual")
    if not exact and residual > 1e-12:
        raise AssertionError(f"balance residual {residual} above tolerance")
    return StationaryResult(
        support=support,
        mu=mu,
        mean_fraction=mean,
        exact=exact,
        n=n,
        residual=float(residual),
    )


def _balance_residual(kernel, support, mu) -> float:
    idx = {i: k for k, i in enumerate(support)}
    worst = 0
    for i in support:
        acc = -mu[idx[i]]
        for j in support:
            p = kernel.transition[j].get(i, 0)
            if p:
                acc += mu[idx[j]] * (p if isinstance(mu[0], Fraction) else float(p))
        worst = max(worst, abs(acc))
    return worst


def stationary_mean_sequence(
    spec: ProtocolSpec,
    plus_state: str,
    n_values: Sequence[int],
    exact: Optional[bool] = None,
) -> list[tuple[int, object]]:
    out = []
    for n in n_values:
        res = stationary_distribution(count_chain(spec, plus_state, n), exact=exact)
        out.append((n, res.mean_fraction))
    return out


def format_stationary_csv(seq: Sequence[tuple[int, object]]) -> str:
    lines = ["n,p_n,exact"]
    for n, p in seq:
        if isinstance(p, Fraction):
            lines.append(f"{n},{float(p):.15g},{p.numerator}/{p.denominator}")
        else:
            lines.append(f"{n},{p:.15g},")
    return "\n".join(lines) + "\n"
