"""Protocol definitions: states, rules, configurations, single interactions.

A protocol is a finite state set with a total deterministic rule map over
ordered state pairs, plus optional input and output maps.  Configurations
are count vectors.  Everything here is an immutable value; operations are
pure functions.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional

NAME_RE = re.compile(r"[A-Za-z0-9+_-]+\Z")


class ProtocolError(Exception):
    """Invalid protocol document or rule usage."""


@dataclass(frozen=True)
class ProtocolSpec:
    states: tuple[str, ...]
    rules: Mapping[tuple[str, str], tuple[str, str]]
    inputs: Optional[Mapping[str, str]] = None
    outputs: Optional[Mapping[str, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "rules", MappingProxyType(dict(self.rules)))
        if self.inputs is not None:
            object.__setattr__(self, "inputs", MappingProxyType(dict(self.inputs)))
        if self.outputs is not None:
            object.__setattr__(self, "outputs", MappingProxyType(dict(self.outputs)))

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_index(self, q: str) -> int:
        try:
            return self.states.index(q)
        except ValueError:
            raise ProtocolError(f"unknown state {q!r}") from None

    def content_hash(self) -> str:
        return hashlib.sha256(serialize_protocol(self).encode()).hexdigest()


@dataclass(frozen=True)
class Configuration:
    counts: Mapping[str, int]
    n: int

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "Configuration":
        for q, c in counts.items():
            if c < 0:
                raise ValueError(f"negative count for state {q!r}")
        n = sum(counts.values())
        if n < 2:
            raise ValueError(f"population must have at least 2 agents, got {n}")
        return cls(MappingProxyType(dict(counts)), n)

    def count(self, q: str) -> int:
        return self.counts.get(q, 0)

    def proportions(self):
        from fractions import Fraction

        return {q: Fraction(c, self.n) for q, c in self.counts.items()}


def _check_name(tok: str, what: str, lineno: int) -> str:
    if not NAME_RE.match(tok):
        raise ProtocolError(f"line {lineno}: invalid {what} name {tok!r}")
    return tok


def _split_arrow(tok: str, lineno: int) -> tuple[str, str]:
    # '>' only occurs in the arrow, so the arrow is the '-' immediately before it
    pos = tok.find(">")
    if pos < 1 or tok[pos - 1] != "-" or ">" in tok[pos + 1 :]:
        raise ProtocolError(f"line {lineno}: expected '<lhs>-><rhs>', got {tok!r}")
    return tok[: pos - 1], tok[pos + 1 :]


def parse_protocol(text: str) -> ProtocolSpec:
    """Parse a protocol document.

    Grammar (line oriented, '#' starts a comment)::

        states: <name> <name> ...
        inputs: <sym>-><state> ...
        outputs: <state>-><0|1> ...
        rule: <q> <q'> -> <r> <r'>
    """
    states: list[str] = []
    inputs: dict[str, str] = {}
    outputs: dict[str, int] = {}
    rules: dict[tuple[str, str], tuple[str, str]] = {}
    seen_states_line = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ProtocolError(f"line {lineno}: missing section keyword")
        key, _, rest = line.partition(":")
        key = key.strip().lower()
        rest = rest.strip()

        if key == "states":
            if seen_states_line:
                raise ProtocolError(f"line {lineno}: duplicate 'states' section")
            seen_states_line = True
            for tok in rest.split():
                _check_name(tok, "state", lineno)
                if tok in states:
                    raise ProtocolError(f"line {lineno}: duplicate state {tok!r}")
                states.append(tok)
            if not states:
                raise ProtocolError(f"line {lineno}: at least one state required")
            continue

        if not seen_states_line:
            raise ProtocolError(f"line {lineno}: 'states' must come first")

        if key == "inputs":
            for tok in rest.split():
                sym, st = _split_arrow(tok, lineno)
                _check_name(sym, "input symbol", lineno)
                if st not in states:
                    raise ProtocolError(f"line {lineno}: undeclared state {st!r}")
                if sym in inputs:
                    raise ProtocolError(f"line {lineno}: duplicate input {sym!r}")
                inputs[sym] = st
        elif key == "outputs":
            for tok in rest.split():
                st, bit = _split_arrow(tok, lineno)
                if st not in states:
                    raise ProtocolError(f"line {lineno}: undeclared state {st!r}")
                if bit not in ("0", "1"):
                    raise ProtocolError(f"line {lineno}: output must be 0 or 1")
                if st in outputs:
                    raise ProtocolError(f"line {lineno}: duplicate output for {st!r}")
                outputs[st] = int(bit)
        elif key == "rule":
            toks = rest.split()
            if len(toks) != 5 or toks[2] != "->":
                raise ProtocolError(
                    f"line {lineno}: expected 'rule: q q' -> r r'', got {rest!r}"
                )
            q, qp, _, r, rp = toks
            for st in (q, qp, r, rp):
                if st not in states:
                    raise ProtocolError(f"line {lineno}: undeclared state {st!r}")
            if (q, qp) in rules:
                raise ProtocolError(
                    f"line {lineno}: duplicate rule for pair ({q}, {qp})"
                )
            rules[(q, qp)] = (r, rp)
        else:
            raise ProtocolError(f"line {lineno}: unknown section {key!r}")

    if not seen_states_line:
        raise ProtocolError("missing 'states' section")

    # identity-complete the rule map
    for q in states:
        for qp in states:
            rules.setdefault((q, qp), (q, qp))

    return ProtocolSpec(
        states=tuple(states),
        rules=rules,
        inputs=inputs or None,
        outputs=outputs or None,
    )


def serialize_protocol(spec: ProtocolSpec) -> str:
    """Canonical form: fixed section order, rules sorted, identities omitted."""
    lines = ["states: " + " ".join(spec.states)]
    if spec.inputs:
        lines.append(
            "inputs: " + " ".join(f"{s}->{q}" for s, q in sorted(spec.inputs.items()))
        )
    if spec.outputs:
        lines.append(
            "outputs: "
            + " ".join(f"{q}->{b}" for q, b in sorted(spec.outputs.items()))
        )
    for (q, qp) in sorted(spec.rules):
        r, rp = spec.rules[(q, qp)]
        if (r, rp) != (q, qp):
            lines.append(f"rule: {q} {qp} -> {r} {rp}")
    return "\n".join(lines) + "\n"


def apply_rule(spec: ProtocolSpec, q: str, qp: str) -> tuple[str, str]:
    if q not in spec.states:
        raise ProtocolError(f"unknown state {q!r}")
    if qp not in spec.states:
        raise ProtocolError(f"unknown state {qp!r}")
    return spec.rules[(q, qp)]


def init_configuration(
    spec: ProtocolSpec, input_counts: Mapping[str, int]
) -> Configuration:
    """Aggregate symbol counts into state counts through the input map.

    Without a declared input map, symbols are taken to be state names.
    """
    counts = {q: 0 for q in spec.states}
    for sym, c in input_counts.items():
        if c < 0:
            raise ValueError(f"negative count for symbol {sym!r}")
        if spec.inputs is not None:
            if sym not in spec.inputs:
                raise ProtocolError(f"unknown input symbol {sym!r}")
            counts[spec.inputs[sym]] += c
        else:
            if sym not in spec.states:
                raise ProtocolError(f"unknown state {sym!r}")
            counts[sym] += c
    return Configuration.from_counts(counts)


def config_output(spec: ProtocolSpec, c: Configuration):
    """0 or 1 when unanimous, None when mixed."""
    if spec.outputs is None:
        raise ProtocolError("protocol declares no output map")
    seen = set()
    for q, cnt in c.counts.items():
        if cnt == 0:
            continue
        if q not in spec.outputs:
            raise ProtocolError(f"no output declared for occupied state {q!r}")
        seen.add(spec.outputs[q])
    if len(seen) == 1:
        return seen.pop()
    return None


def apply_interaction(
    c: Configuration, q: str, qp: str, spec: ProtocolSpec
) -> Configuration:
    """One interaction of an ordered (q, q') pair; total count is preserved."""
    need = 2 if q == qp else 1
    if c.count(q) < need or c.count(qp) < 1:
        raise ValueError(f"not enough agents for pair ({q}, {qp})")
    r, rp = apply_rule(spec, q, qp)
    counts = dict(c.counts)
    for st in spec.states:
        counts.setdefault(st, 0)
    counts[q] -= 1
    counts[qp] -= 1
    counts[r] += 1
    counts[rp] += 1
    return Configuration.from_counts(counts)
