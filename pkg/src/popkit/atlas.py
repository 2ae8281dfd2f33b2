"""Atlas of the 27 two-state rules (alpha, beta, gamma).

Each rule is summarized by the mean '+'-count increments on {+,+}, {+,-}
and {-,-} picks.  The drift polynomial P = aX^2 + bX + c with
a = alpha - 2 beta + gamma, b = 2 beta - 2 gamma, c = gamma determines the
behaviour: an interior root in (0,1) gives an Ornstein-Uhlenbeck limit
around it, otherwise the population is absorbed at a boundary
configuration.  All root arithmetic is exact (rationals and quadratic
surds).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .protocol import ProtocolSpec, parse_protocol
from .surd import Surd, quadratic_roots

PLUS, MINUS = "+", "-"


@dataclass(frozen=True)
class TwoStateRule:
    alpha: int  # increment on a {+,+} pick, in [-2, 0]
    beta: int  # increment on a {+,-} pick, in [-1, 1]
    gamma: int  # increment on a {-,-} pick, in [0, 2]

    def __post_init__(self):
        if not (-2 <= self.alpha <= 0):
            raise ValueError(f"alpha must be in [-2, 0], got {self.alpha}")
        if not (-1 <= self.beta <= 1):
            raise ValueError(f"beta must be in [-1, 1], got {self.beta}")
        if not (0 <= self.gamma <= 2):
            raise ValueError(f"gamma must be in [0, 2], got {self.gamma}")

    @property
    def is_identity(self) -> bool:
        return self.alpha == self.beta == self.gamma == 0

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class RulePolynomial:
    a: int
    b: int
    c: int

    def __call__(self, x):
        return self.a * x * x + self.b * x + self.c

    @property
    def is_zero(self) -> bool:
        return self.a == self.b == self.c == 0

    def __str__(self):
        return f"{self.a}X^2 + {self.b}X + {self.c}"


def enumerate_rules() -> list[TwoStateRule]:
    """All 27 rules in lexicographic (alpha, beta, gamma) order."""
    return [
        TwoStateRule(a, b, g)
        for a, b, g in itertools.product((-2, -1, 0), (-1, 0, 1), (0, 1, 2))
    ]


def polynomial_of(rule: TwoStateRule) -> RulePolynomial:
    return RulePolynomial(
        a=rule.alpha - 2 * rule.beta + rule.gamma,
        b=2 * rule.beta - 2 * rule.gamma,
        c=rule.gamma,
    )


def interior_root(poly: RulePolynomial) -> Optional[Surd]:
    """The unique root of P in the open interval (0, 1), if any.

    Uniqueness is checked, not assumed: finding two interior roots is an
    error.
    """
    if poly.is_zero:
        raise ValueError("identically-zero polynomial has no interior root")
    if poly.a == 0 and poly.b == 0:
        return None
    inside = [r for r in quadratic_roots(poly.a, poly.b, poly.c) if 0 < r < 1]
    if len(inside) > 1:
        raise AssertionError(f"polynomial {poly} has two roots in (0, 1)")
    return inside[0] if inside else None


def realize(rule: TwoStateRule) -> ProtocolSpec:
    """Canonical protocol over {+, -} whose per-pair increments match."""
    pp = {-2: (MINUS, MINUS), -1: (PLUS, MINUS), 0: (PLUS, PLUS)}[rule.alpha]
    mm = {0: (MINUS, MINUS), 1: (PLUS, MINUS), 2: (PLUS, PLUS)}[rule.gamma]
    mixed = {-1: (MINUS, MINUS), 0: None, 1: (PLUS, PLUS)}[rule.beta]
    rules = {}
    if pp != (PLUS, PLUS):
        rules[(PLUS, PLUS)] = pp
    if mm != (MINUS, MINUS):
        rules[(MINUS, MINUS)] = mm
    if mixed is not None:
        rules[(PLUS, MINUS)] = mixed
        rules[(MINUS, PLUS)] = mixed
    lines = [f"states: {PLUS} {MINUS}"]
    for (q, qp), (r, rp) in sorted(rules.items()):
        lines.append(f"rule: {q} {qp} -> {r} {rp}")
    return parse_protocol("\n".join(lines) + "\n")


def noise_coefficient(rule: TwoStateRule, p_star: Surd) -> Surd:
    """q(p*) = (a2-2b2+g2) p*^2 + (2b2-2g2) p* + g2 with squared increments."""
    a2 = rule.alpha**2
    b2 = rule.beta**2
    g2 = rule.gamma**2
    return (
        Surd(a2 - 2 * b2 + g2) * p_star * p_star
        + Surd(2 * b2 - 2 * g2) * p_star
        + Surd(g2)
    )


IDENTITY = "identity"
MONOTONE = "monotone-absorbing"
INTERIOR = "interior-fixed-point"

# vocabulary for absorbing-limit descriptions
ALL_PLUS = "{+}^n"
ALL_MINUS = "{-}^n"
ONE_MINUS = "{-}{+}^(n-1)"
ONE_PLUS = "{+}{-}^(n-1)"


@dataclass(frozen=True)
class RuleClassification:
    rule: TwoStateRule
    polynomial: RulePolynomial
    kind: str
    p_star: Optional[Surd] = None
    q_value: Optional[Surd] = None
    theta: Optional[Surd] = None
    stationary_variance: Optional[Surd] = None
    limit: Optional[str] = None  # monotone rules: absorbing-limit description
    drift_sign: Optional[int] = None  # monotone rules: sign of P on (0,1)

    def certificates(self) -> dict:
        """Lemma-style certificates for interior rules, exact."""
        if self.kind != INTERIOR:
            return {}
        return {
            "root_interior": bool(0 < self.p_star < 1),
            "root_of_polynomial": self.polynomial(self.p_star) == Surd(0),
            "q_positive": self.q_value > Surd(0),
            "theta_positive": self.theta > Surd(0),
        }


def _absorbing_limits(rule: TwoStateRule, n: int = 8) -> set[str]:
    """Absorbing counts reachable from mixed starts, by exhaustive search.

    Returns vocabulary labels for the absorbing '+'-counts reachable from
    at least one mixed initial configuration at population size n.
    """
    from .chain import count_chain

    kernel = count_chain(realize(rule), PLUS, n)
    succ = {
        i: [j for j, p in row.items() if p > 0]
        for i, row in kernel.transition.items()
    }
    absorbing = {i for i, js in succ.items() if js == [i]}
    reached: set[int] = set()
    for start in range(1, n):  # mixed starts only
        seen = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for j in succ[cur]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        reached |= seen & absorbing
    labels = set()
    for i in reached:
        if i == n:
            labels.add(ALL_PLUS)
        elif i == 0:
            labels.add(ALL_MINUS)
        elif i == n - 1:
            labels.add(ONE_MINUS)
        elif i == 1:
            labels.add(ONE_PLUS)
        else:
            labels.add(f"count {i}")
    return labels


def classify(rule: TwoStateRule) -> RuleClassification:
    poly = polynomial_of(rule)
    if rule.is_identity:
        return RuleClassification(rule=rule, polynomial=poly, kind=IDENTITY)
    p_star = interior_root(poly)
    if p_star is not None:
        q = noise_coefficient(rule, p_star)
        theta = -(Surd(2 * poly.a) * p_star + Surd(poly.b))
        return RuleClassification(
            rule=rule,
            polynomial=poly,
            kind=INTERIOR,
            p_star=p_star,
            q_value=q,
            theta=theta,
            stationary_variance=q / (Surd(2) * theta),
        )
    mid = poly(Fraction(1, 2))
    sign = (mid > 0) - (mid < 0)
    if sign == 0:
        # P has no interior root, so it cannot vanish at 1/2 unless P == 0
        # off the identity rule; drift sign at other interior points decides
        probe = poly(Fraction(1, 4))
        sign = (probe > 0) - (probe < 0)
    limits = sorted(_absorbing_limits(rule))
    return RuleClassification(
        rule=rule,
        polynomial=poly,
        kind=MONOTONE,
        limit=" or ".join(limits),
        drift_sign=sign,
    )


def atlas_report() -> dict:
    """Classify all 27 rules and summarize the partition."""
    rows = [classify(r) for r in enumerate_rules()]
    interior = [r for r in rows if r.kind == INTERIOR]
    distinct_roots = set()
    for r in interior:
        distinct_roots.add(r.p_star)
    return {
        "rules": rows,
        "counts": {
            IDENTITY: sum(1 for r in rows if r.kind == IDENTITY),
            MONOTONE: sum(1 for r in rows if r.kind == MONOTONE),
            INTERIOR: len(interior),
        },
        "distinct_interior_roots": sorted(distinct_roots, key=float),
    }


def _surd_record(v: Surd) -> dict:
    u, vv, d, w = v.as_surd_tuple()
    return {"u": u, "v": vv, "d": d, "w": w, "decimal": v.decimal_str(50)}


def atlas_json(report: Optional[dict] = None) -> list[dict]:
    """JSON-ready records, one per rule."""
    report = report or atlas_report()
    out = []
    for r in report["rules"]:
        rec = {
            "rule": list(r.rule.as_tuple()),
            "polynomial": [r.polynomial.a, r.polynomial.b, r.polynomial.c],
            "kind": r.kind,
        }
        if r.kind == INTERIOR:
            rec["p_star"] = _surd_record(r.p_star)
            rec["q"] = _surd_record(r.q_value)
            rec["theta"] = _surd_record(r.theta)
            rec["stationary_variance"] = _surd_record(r.stationary_variance)
            rec["lemma_certificates"] = r.certificates()
        elif r.kind == MONOTONE:
            rec["limit"] = r.limit
            rec["drift_sign"] = r.drift_sign
        out.append(rec)
    return out


def atlas_csv(report: Optional[dict] = None) -> str:
    """Two tables: monotone rules with limits, interior rules with roots."""
    report = report or atlas_report()
    lines = ["table,alpha,beta,gamma,polynomial,p_star,limit"]
    for r in report["rules"]:
        if r.kind == MONOTONE:
            lines.append(
                f"monotone,{r.rule.alpha},{r.rule.beta},{r.rule.gamma},"
                f"{r.polynomial},,{r.limit}"
            )
    for r in report["rules"]:
        if r.kind == INTERIOR:
            lines.append(
                f"interior,{r.rule.alpha},{r.rule.beta},{r.rule.gamma},"
                f"{r.polynomial},{float(r.p_star):.15g},"
            )
    return "\n".join(lines) + "\n"
