"""Pure numpy implementation of the hot kernels.

This module is the reference: the compiled kernel must reproduce its output
bit for bit (same hash schedule, same multiply/add order, floor-based
wrapping).  Everything here is vectorized across trials; the step loop is
inherently sequential.

The counter-based generator hashes (seed, trial, step) through the
splitmix64 finalizer, so any (trial, step) cell can be drawn independently:
thread count and chunking can never change a drawn value.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_TRIAL_SALT = 0xD1B54A32D192ED03
_TRIAL_OFFSET = 0x94D049BB133111EB
_STEP_SALT = 0x2545F4914F6CDD1D
_INV_2_53 = 2.0**-53

_U = np.uint64


def mix64(z: int) -> int:
    """splitmix64 finalizer on python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def trial_bases(seed: int, trial_ids: np.ndarray) -> np.ndarray:
    """Per-trial stream bases; uint64 (T,)."""
    s = mix64((int(seed) & MASK64) ^ _GOLD)
    t = np.asarray(trial_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_vec(_U(s) ^ (t * _U(_TRIAL_SALT) + _U(_TRIAL_OFFSET)))


def step_uniforms(bases: np.ndarray, step: int) -> np.ndarray:
    """One uniform in [0, 1) per trial for an absolute step index."""
    with np.errstate(over="ignore"):
        key = _U((step * _STEP_SALT + _GOLD) & MASK64)
        h = _mix64_vec(bases ^ key)
    return (h >> _U(11)).astype(np.float64) * _INV_2_53


def counter_uniforms(seed: int, trial: int, step0: int, count: int) -> np.ndarray:
    """Uniforms for steps step0 .. step0+count-1 of one (seed, trial) stream."""
    base = trial_bases(seed, np.asarray([trial], dtype=np.uint64))[0]
    steps = np.arange(step0, step0 + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        keys = steps * _U(_STEP_SALT) + _U(_GOLD)
        h = _mix64_vec(_U(base) ^ keys)
    return (h >> _U(11)).astype(np.float64) * _INV_2_53


def atom_choices(seed: int, trial: int, step0: int, count: int,
                 cum_weights: np.ndarray) -> np.ndarray:
    """The atom index sequence a walk with this key will draw."""
    u = counter_uniforms(seed, trial, step0, count)
    return np.searchsorted(np.asarray(cum_weights, dtype=np.float64), u, side="right")


def walk_block(mats: np.ndarray, cum_weights: np.ndarray, state: np.ndarray,
               seed: int, trial_ids: np.ndarray, step0: int, nsteps: int,
               out_points: np.ndarray | None = None,
               out_words: np.ndarray | None = None) -> None:
    """Advance an ensemble of walks by nsteps, in place.

    mats:        (m, d, d) float64, the integer matrices.
    state:       (T, d) float64 in [0, 1); updated in place.
    out_points:  optional (nsteps, T, d); row k holds the state after
                 absolute step step0+k.
    out_words:   optional (nsteps, T) int64 of chosen atom indices.
    """
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    cum = np.ascontiguousarray(cum_weights, dtype=np.float64)
    m, d, _ = mats.shape
    bases = trial_bases(seed, trial_ids)
    for k in range(nsteps):
        u = step_uniforms(bases, step0 + k)
        idx = np.searchsorted(cum, u, side="right")
        chosen = mats[idx]  # (T, d, d)
        old = state.copy()
        for i in range(d):
            acc = chosen[:, i, 0] * old[:, 0]
            for j in range(1, d):
                acc = acc + chosen[:, i, j] * old[:, j]
            acc = acc - np.floor(acc)
            acc[acc >= 1.0] -= 1.0
            state[:, i] = acc
        if out_points is not None:
            out_points[k] = state
        if out_words is not None:
            out_words[k] = idx


def u_delta_sum(points: np.ndarray, centers: np.ndarray, factors: np.ndarray,
                delta: float, metric_sup: bool) -> np.ndarray:
    """sum_k factors[k] * d(x, centers[k])^(-delta) for each point x.

    Exact hits produce +inf.  Chunked to bound temporary memory.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ctr = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    fac = np.asarray(factors, dtype=np.float64)
    n_pts = pts.shape[0]
    out = np.zeros(n_pts, dtype=np.float64)
    # ~8M pair cells per chunk keeps temporaries near 200 MB worst case.
    pt_chunk = max(1, min(n_pts, 8_000_000 // max(1, ctr.shape[0])))
    for a in range(0, n_pts, pt_chunk):
        b = min(a + pt_chunk, n_pts)
        diff = pts[a:b, None, :] - ctr[None, :, :]
        t = diff - np.floor(diff)
        t = np.where(t >= 1.0, t - 1.0, t)
        w = np.minimum(t, 1.0 - t)
        if metric_sup:
            r = w.max(axis=-1)
        else:
            r = np.sqrt((w * w).sum(axis=-1))
        with np.errstate(divide="ignore"):
            term = r ** (-float(delta))
        out[a:b] = term @ fac
    return out
