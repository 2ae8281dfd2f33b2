# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled interaction-chain kernel.

Mirrors ``_kernel_py.run_pair_chain`` step for step and consumes the same
uniform stream, so trajectories are bit-identical across backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BLOCK = 4096
ABSORB_CHECK = 4096

BACKEND = "cython"


cdef bint _is_absorbing(cnp.int64_t[::1] counts, cnp.int64_t[:, ::1] d1,
                        cnp.int64_t[:, ::1] d2, Py_ssize_t k) noexcept:
    cdef Py_ssize_t q, qp
    cdef cnp.int64_t r, rp, lo, hi
    for q in range(k):
        if counts[q] == 0:
            continue
        for qp in range(k):
            if counts[qp] - (1 if q == qp else 0) <= 0:
                continue
            r = d1[q, qp]
            rp = d2[q, qp]
            lo = r if r < rp else rp
            hi = rp if r < rp else r
            if lo != (q if q < qp else qp) or hi != (qp if q < qp else q):
                return False
    return True


def run_pair_chain(counts, d1, d2, steps, record_ks, rng,
                   stop_when_absorbing=False):
    """See ``_kernel_py.run_pair_chain``; identical contract."""
    cdef cnp.int64_t[::1] c = np.ascontiguousarray(counts, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] t1 = np.ascontiguousarray(d1, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] t2 = np.ascontiguousarray(d2, dtype=np.int64)
    cdef cnp.int64_t[::1] rec_ks = np.ascontiguousarray(record_ks, dtype=np.int64)
    cdef Py_ssize_t k = c.shape[0]
    cdef Py_ssize_t nrec = rec_ks.shape[0]
    cdef long long total_steps = steps
    cdef bint stop = stop_when_absorbing

    cdef long long n = 0
    cdef Py_ssize_t i
    for i in range(k):
        n += c[i]
    cdef double denom = <double> (n * (n - 1))

    records_arr = np.empty((nrec, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] records = records_arr

    cdef Py_ssize_t idx = 0
    while idx < nrec and rec_ks[idx] == 0:
        for i in range(k):
            records[idx, i] = c[i]
        idx += 1

    buf_arr = rng.random(BLOCK)
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t pos = 0

    cdef long long step = 0
    cdef double t, acc
    cdef Py_ssize_t q, qp, sel_q, sel_qp
    cdef long long cq
    cdef bint done

    while step < total_steps:
        if stop and step % ABSORB_CHECK == 0:
            if _is_absorbing(c, t1, t2, k):
                break
        if pos == BLOCK:
            buf_arr = rng.random(BLOCK)
            buf = buf_arr
            pos = 0
        t = buf[pos] * denom
        pos += 1
        acc = 0.0
        sel_q = 0
        sel_qp = 0
        done = False
        for q in range(k):
            cq = c[q]
            if cq == 0:
                continue
            for qp in range(k):
                acc += <double> (cq * (c[qp] - (1 if q == qp else 0)))
                if t < acc:
                    sel_q = q
                    sel_qp = qp
                    done = True
                    break
            if done:
                break
        c[sel_q] -= 1
        c[sel_qp] -= 1
        c[t1[sel_q, sel_qp]] += 1
        c[t2[sel_q, sel_qp]] += 1
        step += 1
        while idx < nrec and rec_ks[idx] == step:
            for i in range(k):
                records[idx, i] = c[i]
            idx += 1

    while idx < nrec:
        for i in range(k):
            records[idx, i] = c[i]
        idx += 1
    return records_arr, step
