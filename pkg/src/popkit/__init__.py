"""popkit: population protocols under uniform random pairwise interactions.

Exact finite-n Markov chains, mean-field ODE limits, the 27-rule
two-state atlas, Ornstein-Uhlenbeck fluctuation analysis, and
reproducible Monte-Carlo simulation.
"""

__version__ = "0.1.0"

from .protocol import (  # noqa: F401
    Configuration,
    ProtocolError,
    ProtocolSpec,
    apply_interaction,
    apply_rule,
    config_output,
    init_configuration,
    parse_protocol,
    serialize_protocol,
)
