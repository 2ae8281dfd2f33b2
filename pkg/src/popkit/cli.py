"""Command-line front end.

Subcommands: simulate, ensemble, ode, stationary, atlas, fluct, diag.
Exit codes: 0 success, 2 argument or domain error, 3 input-file error.
Every run is deterministic given its manifest; a JSON manifest sidecar is
written next to each output file.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__, atlas, chain, fluctuation, meanfield, sim
from .protocol import Configuration, ProtocolError, parse_protocol

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_INPUT = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ARGS):
        super().__init__(message)
        self.code = code


def _load_protocol(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read protocol file: {exc}", EXIT_INPUT) from exc
    try:
        return parse_protocol(text)
    except ProtocolError as exc:
        raise CliError(f"protocol parse error: {exc}", EXIT_INPUT) from exc


def _parse_counts(text: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for item in text.split(","):
        if not item.strip():
            continue
        name, _, val = item.rpartition(":")
        try:
            out[name.strip()] = int(val)
        except ValueError:
            raise CliError(f"bad count entry {item!r}") from None
    if not out:
        raise CliError("empty count map")
    return out


def _parse_fractions(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in text.split(","):
        if not item.strip():
            continue
        name, _, val = item.rpartition(":")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise CliError(f"bad proportion entry {item!r}") from None
    return out


def _parse_n_range(text: str) -> list[int]:
    """Accept '200', '2..200' or '2..200:5' or comma lists."""
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            span, _, step = part.partition(":")
            lo, _, hi = span.partition("..")
            try:
                lo_i, hi_i = int(lo), int(hi)
                step_i = int(step) if step else 1
            except ValueError:
                raise CliError(f"bad range {part!r}") from None
            if step_i < 1 or hi_i < lo_i:
                raise CliError(f"bad range {part!r}")
            values.extend(range(lo_i, hi_i + 1, step_i))
        else:
            try:
                values.append(int(part))
            except ValueError:
                raise CliError(f"bad population size {part!r}") from None
    return values


def _parse_rule(text: str) -> atlas.TwoStateRule:
    try:
        a, b, g = (int(v) for v in text.split(","))
        return atlas.TwoStateRule(a, b, g)
    except ValueError as exc:
        raise CliError(f"bad rule {text!r}: {exc}") from None


def _config_from_args(spec, init: str) -> Configuration:
    counts = _parse_counts(init)
    from .protocol import init_configuration

    try:
        return init_configuration(spec, counts)
    except (ProtocolError, ValueError) as exc:
        raise CliError(str(exc)) from exc


def _emit(args, content: str, manifest: dict, plot_fn=None):
    if args.out:
        out = Path(args.out)
        out.write_text(content)
        manifest_path = out.with_suffix(out.suffix + ".manifest.json")
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )
        if getattr(args, "plot", False) and plot_fn is not None:
            plot_fn(out.with_suffix(".svg"))
    else:
        sys.stdout.write(content)


def _manifest(args, subcommand: str, spec=None, **extra) -> dict:
    man = {
        "subcommand": subcommand,
        "args": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("func",)
        },
        "version": __version__,
        "rng": sim.RNG_ID,
    }
    if spec is not None:
        man["protocol_hash"] = spec.content_hash()
    man.update(extra)
    return man


# -- subcommands --------------------------------------------------------------


def cmd_simulate(args):
    spec = _load_protocol(args.protocol)
    c0 = _config_from_args(spec, args.init)
    steps = math.ceil(args.horizon * c0.n)
    traj = sim.simulate(spec, c0, steps, args.seed, thin=args.thin)
    content = sim.trajectory_csv(traj)

    def plot(path):
        _plot_series(
            path,
            traj.ks / traj.n,
            traj.proportions(),
            spec.states,
            "t",
            "proportion",
        )

    _emit(args, content, _manifest(args, "simulate", spec, n=c0.n), plot)


def cmd_ensemble(args):
    spec = _load_protocol(args.protocol)
    c0 = _config_from_args(spec, args.init)
    if args.grid:
        grid = [float(g) for g in args.grid.split(",")]
    else:
        grid = list(np.linspace(0.0, args.horizon, 51))
    try:
        stats = sim.ensemble(
            spec, c0, args.horizon, args.runs, args.seed, grid, workers=args.threads
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    content = sim.ensemble_csv(stats)

    def plot(path):
        _plot_series(path, stats.grid, stats.mean, spec.states, "t", "mean proportion")

    _emit(args, content, _manifest(args, "ensemble", spec, n=c0.n), plot)


def cmd_ode(args):
    spec = _load_protocol(args.protocol)
    if args.dt <= 0:
        raise CliError("dt must be positive")
    fracs = _parse_fractions(args.x0)
    for q in fracs:
        if q not in spec.states:
            raise CliError(f"unknown state {q!r} in --x0")
    missing = [q for q in spec.states if q not in fracs]
    rest = 1.0 - sum(fracs.values())
    if rest < -1e-9:
        raise CliError("--x0 proportions exceed 1")
    if missing:
        for q in missing:
            fracs[q] = rest / len(missing)
    elif abs(rest) > 1e-9:
        raise CliError("--x0 proportions must sum to 1")
    x0 = [fracs[q] for q in spec.states]
    system = meanfield.derive_drift(spec)
    try:
        ts, xs = meanfield.integrate_ode(system, x0, args.t, args.dt)
    except (ValueError, meanfield.LeftSimplexError) as exc:
        raise CliError(str(exc)) from exc
    lines = ["t," + ",".join(spec.states)]
    for t, x in zip(ts, xs):
        lines.append(f"{t:.15g}," + ",".join(f"{v:.15g}" for v in x))
    content = "\n".join(lines) + "\n"

    def plot(path):
        _plot_series(path, ts, xs, spec.states, "t", "proportion")

    _emit(args, content, _manifest(args, "ode", spec), plot)


def cmd_stationary(args):
    spec = _load_protocol(args.protocol)
    if spec.n_states != 2:
        raise CliError("2-state only")
    plus = args.plus or spec.states[0]
    if plus not in spec.states:
        raise CliError(f"unknown state {plus!r}")
    n_values = _parse_n_range(args.n)
    if any(n < 2 for n in n_values):
        raise CliError("population sizes must be >= 2")
    exact = True if args.exact else None
    try:
        seq = chain.stationary_mean_sequence(spec, plus, n_values, exact=exact)
    except chain.ChainStructureError as exc:
        raise CliError(f"no unique stationary distribution: {exc}") from exc
    content = chain.format_stationary_csv(seq)

    def plot(path):
        ns = [n for n, _ in seq]
        ps = [float(p) for _, p in seq]
        _plot_series(
            path, np.array(ns), np.array(ps).reshape(-1, 1), ["p_n"], "n", "p_n"
        )

    _emit(args, content, _manifest(args, "stationary", spec), plot)


def cmd_atlas(args):
    if args.rule:
        rule = _parse_rule(args.rule)
        records = [r for r in atlas.atlas_json() if r["rule"] == list(rule.as_tuple())]
    else:
        records = atlas.atlas_json()
    if args.format == "csv":
        content = atlas.atlas_csv()
    else:
        content = json.dumps(records, sort_keys=True, indent=2) + "\n"
    _emit(args, content, _manifest(args, "atlas"))


def cmd_fluct(args):
    rule = _parse_rule(args.rule)
    try:
        report = fluctuation.fluctuation_report(
            rule,
            args.n,
            args.runs,
            args.horizon,
            args.burnin,
            args.seed,
            workers=args.threads,
            estimate_theta=args.theta,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    content = json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"
    _emit(args, content, _manifest(args, "fluct"))


def cmd_diag(args):
    spec = _load_protocol(args.protocol)
    c = _config_from_args(spec, args.init)
    if args.eps <= 0:
        raise CliError("epsilon must be positive")
    d = meanfield.diffusion_diagnostics(spec, c, args.eps)
    payload = {
        "n": d.n,
        "epsilon": float(d.epsilon),
        "drift": [float(v) for v in d.drift],
        "covariance": [[float(v) for v in row] for row in d.covariance],
        "third_moment": d.third_moment,
        "tail_mass": float(d.tail_mass),
        "max_jump": d.max_jump,
        "states": list(spec.states),
    }
    content = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _emit(args, content, _manifest(args, "diag", spec))


def _plot_series(path, xs, ys, labels, xlabel, ylabel):
    try:
        import matplotlib

        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping plot", file=sys.stderr)
        return
    fig, ax = plt.subplots()
    for j, lab in enumerate(labels):
        ax.plot(xs, np.asarray(ys)[:, j], label=str(lab))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.savefig(path, format="svg")
    plt.close(fig)


# let values like '-1,1,1' pass through argparse as arguments
_RULE_LIKE = re.compile(r"^-?\d+$|^-?\d*\.\d+$|^-?\d+(,-?\d+)+$")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="popkit")
    p._negative_number_matcher = _RULE_LIKE
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, protocol=True):
        sp._negative_number_matcher = _RULE_LIKE
        if protocol:
            sp.add_argument("--protocol", required=True, help="protocol file")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        sp.add_argument("--plot", action="store_true", help="emit an SVG plot")
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("simulate", help="run one trajectory")
    common(sp)
    sp.add_argument("--init", required=True, help="counts, e.g. '+:10,-:90'")
    sp.add_argument("--horizon", type=float, required=True, help="rescaled time")
    sp.add_argument("--thin", type=int, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ensemble", help="ensemble statistics over runs")
    common(sp)
    sp.add_argument("--init", required=True)
    sp.add_argument("--horizon", type=float, required=True)
    sp.add_argument("--runs", type=int, required=True)
    sp.add_argument("--grid", help="comma list of time points")
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("ode", help="integrate the mean-field ODE")
    common(sp)
    sp.add_argument("--x0", required=True, help="proportions, e.g. '+:0'")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.set_defaults(func=cmd_ode)

    sp = sub.add_parser("stationary", help="stationary means over n")
    common(sp)
    sp.add_argument("--n", required=True, help="e.g. '200' or '2..200:5'")
    sp.add_argument("--plus", help="designated '+' state (default: first)")
    sp.add_argument("--exact", action="store_true", help="force rationals")
    sp.set_defaults(func=cmd_stationary)

    sp = sub.add_parser("atlas", help="classify the 27 two-state rules")
    common(sp, protocol=False)
    sp.add_argument("--rule", help="single rule 'alpha,beta,gamma'")
    sp.set_defaults(func=cmd_atlas, format_default="json")

    sp = sub.add_parser("fluct", help="fluctuation report for a rule")
    common(sp, protocol=False)
    sp.add_argument("--rule", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--runs", type=int, required=True)
    sp.add_argument("--horizon", type=float, required=True)
    sp.add_argument("--burnin", type=float, required=True)
    sp.add_argument("--theta", action="store_true", help="estimate mean reversion")
    sp.set_defaults(func=cmd_fluct)

    sp = sub.add_parser("diag", help="diffusion-approximation diagnostics")
    common(sp)
    sp.add_argument("--init", required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.set_defaults(func=cmd_diag)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "format", None) is None:
        args.format = "json" if args.command in ("atlas", "fluct", "diag") else "csv"
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
