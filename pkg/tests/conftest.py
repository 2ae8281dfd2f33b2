import pytest

from popkit.protocol import parse_protocol

SQRT2_DOC = """\
states: + -
rule: + + -> + -
rule: + - -> + +
rule: - + -> + +
rule: - - -> + -
"""


@pytest.fixture(scope="session")
def sqrt2_spec():
    """The 4-rule protocol whose '+'-proportion converges to sqrt(2)/2."""
    return parse_protocol(SQRT2_DOC)


@pytest.fixture
def sqrt2_doc():
    return SQRT2_DOC


@pytest.fixture
def protocol_file(tmp_path):
    path = tmp_path / "sqrt2.pp"
    path.write_text(SQRT2_DOC)
    return path


def random_protocol(rng, n_states):
    """A uniformly random deterministic rule table over n_states states."""
    states = [f"s{i}" for i in range(n_states)]
    lines = ["states: " + " ".join(states)]
    for q in states:
        for qp in states:
            r = states[rng.integers(n_states)]
            rp = states[rng.integers(n_states)]
            if (r, rp) != (q, qp):
                lines.append(f"rule: {q} {qp} -> {r} {rp}")
    return parse_protocol("\n".join(lines) + "\n")
