"""Pure-Python interaction-chain kernel.

Reference implementation of the hot loop; the compiled Cython kernel in
``_kernel.pyx`` mirrors this step for step and consumes the identical
uniform stream, so both backends produce bit-identical trajectories.
"""

from __future__ import annotations

import numpy as np

BLOCK = 4096
ABSORB_CHECK = 4096

BACKEND = "python"


def _is_absorbing(counts, d1, d2, k: int) -> bool:
    for q in range(k):
        if counts[q] == 0:
            continue
        for qp in range(k):
            if counts[qp] - (1 if q == qp else 0) <= 0:
                continue
            r, rp = d1[q, qp], d2[q, qp]
            if min(r, rp) != min(q, qp) or max(r, rp) != max(q, qp):
                return False
    return True


def run_pair_chain(counts, d1, d2, steps, record_ks, rng, stop_when_absorbing=False):
    """Run `steps` uniform ordered-pair interactions, recording snapshots.

    counts: int64 array (k,); the caller must pass an array it owns, the
        kernel may advance it in place.
    d1, d2: int64 arrays (k, k), rule targets for ordered pairs.
    record_ks: sorted unique int64 array of step indices in [0, steps];
        the snapshot after that many steps is stored.
    Returns (records, steps_done); on early absorption the remaining
    snapshots repeat the absorbed configuration.
    """
    counts = np.asarray(counts, dtype=np.int64)
    k = len(counts)
    n = int(counts.sum())
    denom = float(n * (n - 1))
    nrec = len(record_ks)
    records = np.empty((nrec, k), dtype=np.int64)

    idx = 0
    while idx < nrec and record_ks[idx] == 0:
        records[idx] = counts
        idx += 1

    buf = rng.random(BLOCK)
    pos = 0
    step = 0
    while step < steps:
        if stop_when_absorbing and step % ABSORB_CHECK == 0:
            if _is_absorbing(counts, d1, d2, k):
                break
        if pos == BLOCK:
            buf = rng.random(BLOCK)
            pos = 0
        t = buf[pos] * denom
        pos += 1
        acc = 0.0
        sel_q = sel_qp = 0
        done = False
        for q in range(k):
            cq = counts[q]
            if cq == 0:
                continue
            for qp in range(k):
                acc += cq * (counts[qp] - (1 if q == qp else 0))
                if t < acc:
                    sel_q, sel_qp = q, qp
                    done = True
                    break
            if done:
                break
        counts[sel_q] -= 1
        counts[sel_qp] -= 1
        counts[d1[sel_q, sel_qp]] += 1
        counts[d2[sel_q, sel_qp]] += 1
        step += 1
        while idx < nrec and record_ks[idx] == step:
            records[idx] = counts
            idx += 1

    while idx < nrec:
        records[idx] = counts
        idx += 1
    return records, step
