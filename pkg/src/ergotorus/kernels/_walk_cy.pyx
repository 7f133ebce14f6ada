# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of _walk_py: identical hash schedule and float semantics.

Compiled with -ffp-contract=off so the mul/add sequence matches numpy's
(no FMA fusion), keeping trajectories bit-identical across backends.
"""

from libc.math cimport floor, sqrt, pow as cpow, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t et_mix64(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    """
    unsigned long long et_mix64(unsigned long long z) nogil

cdef unsigned long long GOLD = <unsigned long long> 0x9E3779B97F4A7C15
cdef unsigned long long TRIAL_SALT = <unsigned long long> 0xD1B54A32D192ED03
cdef unsigned long long TRIAL_OFFSET = <unsigned long long> 0x94D049BB133111EB
cdef unsigned long long STEP_SALT = <unsigned long long> 0x2545F4914F6CDD1D
cdef double INV_2_53 = 1.0 / 9007199254740992.0


def walk_block(mats, cum_weights, state, seed, trial_ids, step0, nsteps,
               out_points=None, out_words=None):
    """Same contract as _walk_py.walk_block."""
    cdef double[:, :, ::1] m = np.ascontiguousarray(mats, dtype=np.float64)
    cdef double[::1] cum = np.ascontiguousarray(cum_weights, dtype=np.float64)
    cdef double[:, ::1] x = state
    cdef unsigned long long[::1] tid = np.ascontiguousarray(trial_ids, dtype=np.uint64)

    cdef Py_ssize_t n_atoms = m.shape[0]
    cdef Py_ssize_t d = m.shape[1]
    cdef Py_ssize_t n_trials = x.shape[0]
    cdef Py_ssize_t n_steps = int(nsteps)
    cdef unsigned long long seed_u = <unsigned long long> (int(seed) & ((1 << 64) - 1))
    cdef unsigned long long base_seed = et_mix64(seed_u ^ GOLD)
    cdef unsigned long long s0 = <unsigned long long> int(step0)

    cdef double[:, :, ::1] pts_out = None
    cdef long long[:, ::1] words_out = None
    cdef bint want_points = out_points is not None
    cdef bint want_words = out_words is not None
    if want_points:
        pts_out = out_points
    if want_words:
        words_out = out_words

    if d > 16:
        raise ValueError("dimension above 16 not supported by the compiled kernel")

    cdef unsigned long long base, h, key
    cdef double u, acc
    cdef Py_ssize_t t, k, i, j, idx
    cdef double tmp[16]

    with nogil:
        for t in range(n_trials):
            base = et_mix64(base_seed ^ (tid[t] * TRIAL_SALT + TRIAL_OFFSET))
            for k in range(n_steps):
                key = (s0 + <unsigned long long> k) * STEP_SALT + GOLD
                h = et_mix64(base ^ key)
                u = <double> (h >> 11) * INV_2_53
                idx = 0
                while idx < n_atoms - 1 and u >= cum[idx]:
                    idx += 1
                for i in range(d):
                    acc = m[idx, i, 0] * x[t, 0]
                    for j in range(1, d):
                        acc = acc + m[idx, i, j] * x[t, j]
                    acc = acc - floor(acc)
                    if acc >= 1.0:
                        acc -= 1.0
                    tmp[i] = acc
                for i in range(d):
                    x[t, i] = tmp[i]
                if want_points:
                    for i in range(d):
                        pts_out[k, t, i] = tmp[i]
                if want_words:
                    words_out[k, t] = <long long> idx


def u_delta_sum(points, centers, factors, delta, metric_sup):
    """Same contract as _walk_py.u_delta_sum (sequential center loop)."""
    cdef double[:, ::1] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef double[:, ::1] ctr = np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64)
    cdef double[::1] fac = np.ascontiguousarray(factors, dtype=np.float64)
    cdef Py_ssize_t n_pts = pts.shape[0]
    cdef Py_ssize_t n_ctr = ctr.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef double dd = float(delta)
    cdef bint sup = bool(metric_sup)

    out_arr = np.zeros(n_pts, dtype=np.float64)
    cdef double[::1] out = out_arr

    cdef Py_ssize_t i, k, j
    cdef double total, r, t, w, s
    with nogil:
        for i in range(n_pts):
            total = 0.0
            for k in range(n_ctr):
                r = 0.0
                s = 0.0
                for j in range(d):
                    t = pts[i, j] - ctr[k, j]
                    t = t - floor(t)
                    if t >= 1.0:
                        t -= 1.0
                    w = t if t <= 1.0 - t else 1.0 - t
                    if sup:
                        if w > r:
                            r = w
                    else:
                        s += w * w
                if not sup:
                    r = sqrt(s)
                if r == 0.0:
                    total = INFINITY
                    break
                total += fac[k] * cpow(r, -dd)
            out[i] = total
    return out_arr
