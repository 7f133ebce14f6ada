"""Rational approximation, height functions, and drift diagnostics.

The central objects are the height h_phi (how well x is approximated by
rationals, weighted by a growth profile phi) and the families u_delta / u_phi
of Lyapunov-style weight functions blowing up on 0 resp. on all rational
points up to a truncation denominator.  drift_fit measures contraction of
the iterated transfer operator against such a weight on a point sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import BudgetExceededError, ValidationError
from .torus import (
    GeneratorMeasure,
    MetricKind,
    TorusPoint,
    as_point,
    torus_distance,
    wrap_unit,
    wrapped_gap,
)


@dataclass(frozen=True)
class PhiSpec:
    """Growth profile phi(q) used to weight denominators.

    family "power":         phi(q) = q**exponent          (exponent > 0)
    family "stretched_exp": phi(q) = exp(scale * q**exponent)
    """

    family: str
    exponent: float
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in ("power", "stretched_exp"):
            raise ValidationError("phi.family", f"unknown family {self.family!r}")
        if self.exponent <= 0:
            raise ValidationError("phi.exponent", "must be positive")
        if self.family == "stretched_exp" and self.scale <= 0:
            raise ValidationError("phi.scale", "must be positive")

    def __call__(self, q: float) -> float:
        if self.family == "power":
            return float(q) ** self.exponent
        return math.exp(self.scale * float(q) ** self.exponent)

    def inverse(self, s: float) -> float:
        """inf { q >= 0 : phi(q) >= s }; 0 when s <= phi(0+)."""
        if s <= 1.0:
            return 0.0
        if self.family == "power":
            return s ** (1.0 / self.exponent)
        return (math.log(s) / self.scale) ** (1.0 / self.exponent)

    def summable(self, delta: float, dimension: int) -> bool:
        """Whether sum_n n^dimension / phi(n)^delta converges."""
        if self.family == "stretched_exp":
            return True
        return self.exponent * delta > dimension + 1


@dataclass(frozen=True)
class DriftSpec:
    """Parameters for the truncated u_phi weight and its drift check."""

    delta: float = 0.3
    a: float = 0.5
    b: float = 1.0
    n0: int = 1
    phi: PhiSpec = field(default_factory=lambda: PhiSpec("stretched_exp", 0.2, 1.0))
    q_max: int = 50
    metric: MetricKind = MetricKind.SUP

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError("drift.delta", "must be positive")
        if not (0.0 < self.a < 1.0):
            raise ValidationError("drift.a", "must lie in (0, 1)")
        if self.b < 0:
            raise ValidationError("drift.b", "must be nonnegative")
        if self.n0 < 1:
            raise ValidationError("drift.n0", "must be at least 1")
        if self.q_max < 1:
            raise ValidationError("drift.q_max", "must be at least 1")


@dataclass(frozen=True)
class RationalApprox:
    """Best rational approximant found at one scan denominator.

    `q` is the reduced common denominator of the point (minimal for it);
    `scan_q` is the grid denominator the point was found at.
    """

    point: TorusPoint
    q: int
    scan_q: int
    dist: float


def best_rational_approx(x, q_max: int,
                         metric: MetricKind = MetricKind.SUP) -> list[RationalApprox]:
    """Nearest point of the (1/q)-grid for every q <= q_max.

    Per-coordinate rounding is the exact minimizer for both supported norms,
    so this is a complete table, not a heuristic.
    """
    x = as_point(x)
    if q_max < 1:
        raise ValidationError("q_max", "must be at least 1")
    out = []
    for q in range(1, q_max + 1):
        fracs = tuple(Fraction(round(c * q) % q, q) for c in x.coords)
        pt = TorusPoint.from_fractions(fracs)
        out.append(RationalApprox(
            point=pt,
            q=math.lcm(*(f.denominator for f in fracs)),
            scan_q=q,
            dist=torus_distance(x, pt, metric),
        ))
    return out


def h_phi(x, phi: PhiSpec, q_max: int, metric: MetricKind = MetricKind.SUP) -> float:
    """Truncated height sup_{q <= q_max} 1 / (phi(q) d(x, p/q)).

    Infinite exactly when x is itself rational with denominator <= q_max.
    Nondecreasing in q_max by construction.
    """
    best = 0.0
    for approx in best_rational_approx(x, q_max, metric):
        if approx.dist == 0.0:
            return math.inf
        best = max(best, 1.0 / (phi(approx.scan_q) * approx.dist))
    return best


def primitive_points(q: int, dimension: int) -> list[TorusPoint]:
    """X_q: rational points whose reduced common denominator is exactly q."""
    if q < 1:
        raise ValidationError("q", "must be at least 1")
    return [
        TorusPoint.from_fractions([Fraction(v, q) for v in tup])
        for tup in _primitive_tuples(q, dimension)
    ]


def _primitive_tuples(q: int, dimension: int) -> list[tuple[int, ...]]:
    if q == 1:
        return [(0,) * dimension]
    # gcd(p_1, ..., p_d, q) == 1 is exactly "reduced lcm denominator is q".
    return [tup for tup in _integer_box(q, dimension) if math.gcd(*tup, q) == 1]


def _integer_box(q: int, dimension: int):
    idx = [0] * dimension
    while True:
        yield tuple(idx)
        for pos in range(dimension - 1, -1, -1):
            idx[pos] += 1
            if idx[pos] < q:
                break
            idx[pos] = 0
        else:
            return


def u_delta_values(points: np.ndarray, delta: float,
                   metric: MetricKind = MetricKind.SUP) -> np.ndarray:
    """d(x, 0)^(-delta) vectorized; +inf at 0."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    zero = np.zeros((1, pts.shape[1]))
    return kernels.u_delta_sum(pts, zero, np.ones(1), delta, metric is MetricKind.SUP)


def u_delta(x, delta: float, metric: MetricKind = MetricKind.SUP) -> float:
    return float(u_delta_values(as_point(x).array[None, :], delta, metric)[0])


@lru_cache(maxsize=8)
def _primitive_lattice(q_max: int, dimension: int, phi: PhiSpec,
                       delta: float) -> tuple[np.ndarray, np.ndarray]:
    """All X_Q points for Q <= q_max with their phi(Q)^(-delta) factors."""
    centers = []
    factors = []
    for q in range(1, q_max + 1):
        tuples = _primitive_tuples(q, dimension)
        if not tuples:
            continue
        factor = phi(q) ** (-delta)
        centers.extend([[v / q for v in tup] for tup in tuples])
        factors.extend([factor] * len(tuples))
    return (np.asarray(centers, dtype=np.float64),
            np.asarray(factors, dtype=np.float64))


class UPhi:
    """Truncated weight u_phi(x) = 1 + sum_{Q<=q_max} phi(Q)^(-delta)
    sum_{p in X_Q} d(x - p, 0)^(-delta).

    u_delta stands in for the iterated-kernel variant of the singular core;
    drift_fit verifies the contraction for P^{n0} directly.  Values are >= 1
    everywhere and infinite exactly on the rational points of denominator
    <= q_max.
    """

    def __init__(self, spec: DriftSpec, dimension: int):
        self.spec = spec
        self.dimension = dimension
        self.centers, self.factors = _primitive_lattice(
            spec.q_max, dimension, spec.phi, spec.delta
        )

    @property
    def lattice_size(self) -> int:
        return self.centers.shape[0]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        core = kernels.u_delta_sum(
            pts, self.centers, self.factors, self.spec.delta,
            self.spec.metric is MetricKind.SUP,
        )
        return 1.0 + core

    def __call__(self, x) -> float:
        return float(self.evaluate(as_point(x, self.dimension).array[None, :])[0])


def u_phi(x, spec: DriftSpec) -> float:
    x = as_point(x)
    return UPhi(spec, x.dimension)(x)


def u_zero_evaluator(rho: GeneratorMeasure, delta: float, n0: int,
                     a1: float | None = None, a: float = 0.5,
                     metric: MetricKind = MetricKind.SUP) -> Callable[[np.ndarray], np.ndarray]:
    """The damped Cesaro-type weight u_0 = sum_{k<n0} a1^(-k) P^k u_delta.

    a1 defaults to a**(1/n0), the edge of the range where one iteration of
    the n0-step contraction is not undone by the damping.
    """
    if a1 is None:
        a1 = a ** (1.0 / n0)
    if not (0.0 < a1 < 1.0):
        raise ValidationError("a1", "must lie in (0, 1)")
    layers = _word_layers(rho, n0 - 1)

    def evaluate(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        total = np.zeros(pts.shape[0])
        for k, (mats_t, weights) in enumerate(layers):
            coeff = a1 ** (-k)
            for mt, w in zip(mats_t, weights):
                total += (coeff * w) * u_delta_values(wrap_unit(pts @ mt), delta, metric)
        return total

    return evaluate


def _word_layers(rho: GeneratorMeasure, k_max: int):
    """Transposed word matrices and weights for P^0 ... P^{k_max}."""
    layers = []
    mats_t = [np.eye(rho.dimension)]
    weights = [1.0]
    layers.append((list(mats_t), list(weights)))
    base = [(m.array.astype(np.float64), float(w)) for m, w in rho.atoms]
    for _ in range(k_max):
        nxt_m, nxt_w = [], []
        for mt, w in zip(mats_t, weights):
            for g, wg in base:
                nxt_m.append(mt @ g.T)
                nxt_w.append(w * wg)
        mats_t, weights = nxt_m, nxt_w
        layers.append((list(mats_t), list(weights)))
    return layers


@dataclass(frozen=True)
class DriftFitResult:
    a_hat: float
    b_hat: float
    violations: int
    n_iter: int
    sample_size: int
    max_ratio: float


def drift_fit(rho: GeneratorMeasure, u_eval, sample, n_iter: int,
              max_atoms: int = 1 << 21) -> DriftFitResult:
    """Fit P^{n_iter} u <= a u + b on a point sample.

    P^{n_iter} u is computed by exact word enumeration (no sampling).  The
    scan walks a = 0.00, 0.01, ..., 1.00 from below; for each a the offset
    b is the 99% quantile (method "higher") of the clipped residuals
    max(P^n u - a u, 0), so one sample point accidentally near the singular
    set cannot dictate b.  A point counts as a violation when its residual
    exceeds twice that bulk offset: such a point is not absorbed by any
    modest inflation of b and marks a genuinely different residual scale.
    a_hat is the smallest a with no violations (for samples without
    near-singular outliers this is typically 0, with b carrying the bound);
    if every a has violations, the minimizing a is reported with its count.
    """
    pts = _sample_array(sample, rho.dimension)
    required = rho.support_size**n_iter
    if required > max_atoms:
        raise BudgetExceededError(required=required, budget=max_atoms)

    u_vals = np.asarray(u_eval(pts), dtype=np.float64)
    if not np.all(np.isfinite(u_vals)):
        raise ValidationError("sample", "u is not finite on the sample")

    arr = pts
    weights = np.ones(1)
    w_step = rho.weights_float()
    mats_t = [m.array.astype(np.float64).T for m in rho.matrices]
    for _ in range(n_iter):
        arr = np.concatenate([wrap_unit(arr @ mt) for mt in mats_t], axis=0)
        weights = np.concatenate([weights * w for w in w_step])
    img_vals = np.asarray(u_eval(arr), dtype=np.float64).reshape(len(weights), len(pts))
    pn_u = weights @ img_vals

    best = None
    for a in np.arange(0.0, 1.0 + 1e-9, 0.01):
        resid = pn_u - a * u_vals
        positive = np.clip(resid, 0.0, None)
        b_a = float(np.quantile(positive, 0.99, method="higher"))
        viol = int(np.sum(resid > 2.0 * b_a + 1e-9))
        if best is None or viol < best[2]:
            best = (float(a), b_a, viol)
        if viol == 0:
            break
    a_hat, b_hat, violations = best
    return DriftFitResult(
        a_hat=a_hat, b_hat=b_hat, violations=violations, n_iter=n_iter,
        sample_size=len(pts), max_ratio=float(np.max(pn_u / u_vals)),
    )


def _sample_array(sample, dimension: int) -> np.ndarray:
    if isinstance(sample, np.ndarray):
        pts = np.atleast_2d(sample.astype(np.float64))
    else:
        pts = np.asarray([as_point(s, dimension).coords for s in sample])
    if pts.shape[1] != dimension:
        raise ValidationError("sample", f"points of dimension {pts.shape[1]}, expected {dimension}")
    return pts


def diophantine_sample(dimension: int, count: int, seed: int) -> np.ndarray:
    """Quasi-random sample points for drift/height experiments.

    Golden-ratio lattice shifted by a seeded offset: well spread, and with
    probability one no point is rational with small denominator.
    """
    alphas = _irrational_directions(dimension)
    offset = kernels.counter_uniforms(seed, 0, 0, dimension)
    k = np.arange(1, count + 1, dtype=np.float64)
    return (k[:, None] * alphas[None, :] + offset[None, :]) % 1.0


def _irrational_directions(dimension: int) -> np.ndarray:
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53]
    if dimension > len(primes):
        raise ValidationError("dimension", "sample supports dimension <= 16")
    return np.sqrt(np.asarray(primes[:dimension], dtype=np.float64)) % 1.0


@dataclass(frozen=True)
class LyapunovEstimate:
    mean: float
    stderr: float
    n: int
    trials: int


def lyapunov_estimate(rho: GeneratorMeasure, n: int, trials: int,
                      seed: int) -> LyapunovEstimate:
    """Average of (1/n) log ||g_n ... g_1 v|| over random unit starts.

    Matrix choices come from the same counter stream as torus walks; the
    start vectors from a derived stream, so the estimate is reproducible
    per (seed, trial).
    """
    if n < 1 or trials < 2:
        raise ValidationError("n", "need n >= 1 and trials >= 2")
    d = rho.dimension
    vec_seed = kernels.mix64(seed ^ 0xA5B35705)
    raw = np.stack([
        kernels.counter_uniforms(vec_seed, t, 0, 2 * d) for t in range(trials)
    ])
    u1 = np.maximum(raw[:, :d], 2.0**-53)
    u2 = raw[:, d:]
    vectors = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    vectors = vectors / norms

    mats = rho.matrices_float()
    bases = kernels.trial_bases(seed, np.arange(trials, dtype=np.uint64))
    log_norm = np.zeros(trials)
    for step_idx in range(n):
        u = kernels.step_uniforms(bases, step_idx)
        idx = np.searchsorted(rho.cum_weights(), u, side="right")
        vectors = np.einsum("tij,tj->ti", mats[idx], vectors)
        r = np.linalg.norm(vectors, axis=1)
        log_norm += np.log(r)
        vectors = vectors / r[:, None]
    per_trial = log_norm / n
    return LyapunovEstimate(
        mean=float(per_trial.mean()),
        stderr=float(per_trial.std(ddof=1) / math.sqrt(trials)),
        n=n,
        trials=trials,
    )


@dataclass(frozen=True)
class DiophantineReport:
    solutions: tuple[RationalApprox, ...]
    verdict: bool
    q_min: int
    q_max: int
    B: float
    beta: float


def diophantine_check(x, B: float, beta: float, q_max: int,
                      metric: MetricKind = MetricKind.SUP,
                      q_min: int = 1) -> DiophantineReport:
    """List rational points with d(x, p/q) <= exp(-B q^beta), q reduced.

    Verdict passes when no solution has reduced denominator >= q_min (the
    floor exists because tiny q can satisfy the bound for trivial reasons).
    """
    if B <= 0 or beta <= 0:
        raise ValidationError("B", "B and beta must be positive")
    seen: set[tuple] = set()
    solutions = []
    for approx in best_rational_approx(x, q_max, metric):
        key = approx.point.exact
        if key in seen:
            continue
        seen.add(key)
        if approx.dist <= math.exp(-B * approx.q**beta):
            solutions.append(approx)
    verdict = not any(sol.q >= q_min for sol in solutions)
    return DiophantineReport(
        solutions=tuple(solutions), verdict=verdict,
        q_min=q_min, q_max=q_max, B=B, beta=beta,
    )


def approx_table(x, phi: PhiSpec, q_max: int,
                 metric: MetricKind = MetricKind.SUP) -> list[dict]:
    """Rows for the diophantine report: one best approximant per scan q."""
    x = as_point(x)
    rows = []
    for approx in best_rational_approx(x, q_max, metric):
        numerators = [round(c * approx.scan_q) % approx.scan_q for c in x.coords]
        phi_q = phi(approx.scan_q)
        rows.append({
            "q": approx.scan_q,
            "p": numerators,
            "dist": approx.dist,
            "phi_q": phi_q,
            "height_term": math.inf if approx.dist == 0.0 else 1.0 / (phi_q * approx.dist),
        })
    return rows
