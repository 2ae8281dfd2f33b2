"""Compare the compiled interaction kernel against the pure-Python fallback.

Runs the same seeded chain through both kernels, checks the outputs are
bit-identical, and reports steps/second for each.

Usage: python3 benchmarks/bench_kernels.py [--n 10000] [--steps 1000000]
"""

import argparse
import time

import numpy as np

from popkit import sim
from popkit._kernel_py import run_pair_chain as run_py
from popkit.protocol import parse_protocol
from popkit.sim import _rule_tables, make_rng

SQRT2_DOC = (
    "states: + -\n"
    "rule: + + -> + -\n"
    "rule: + - -> + +\n"
    "rule: - + -> + +\n"
    "rule: - - -> + -\n"
)


def bench(kernel_fn, counts, d1, d2, steps, record_ks, seed):
    rng = make_rng(seed)
    start = time.perf_counter()
    records, done = kernel_fn(counts.copy(), d1, d2, steps, record_ks, rng)
    elapsed = time.perf_counter() - start
    assert done == steps
    return records, elapsed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    try:
        from popkit._kernel import run_pair_chain as run_cy
    except ImportError:
        run_cy = None

    spec = parse_protocol(SQRT2_DOC)
    d1, d2 = _rule_tables(spec)
    counts = np.array([0, args.n], dtype=np.int64)
    record_ks = np.asarray([args.steps], dtype=np.int64)

    rec_py, t_py = bench(run_py, counts, d1, d2, args.steps, record_ks, args.seed)
    print(f"python  : {args.steps / t_py:12,.0f} steps/s  ({t_py:.2f} s)")

    if run_cy is None:
        print("cython  : extension not built (pip install -e . to compile)")
        return

    rec_cy, t_cy = bench(run_cy, counts, d1, d2, args.steps, record_ks, args.seed)
    print(f"cython  : {args.steps / t_cy:12,.0f} steps/s  ({t_cy:.2f} s)")
    print(f"speedup : {t_py / t_cy:.1f}x")

    if (rec_py == rec_cy).all():
        print("outputs : bit-identical")
    else:
        raise SystemExit("outputs differ between kernels")


if __name__ == "__main__":
    main()
