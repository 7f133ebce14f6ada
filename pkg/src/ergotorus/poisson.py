"""Poisson equation by truncated Neumann series and two variance estimators.

Correlations of trigonometric polynomials are computed exactly: propagating
a character through l steps yields a rational-weighted frequency
distribution, and integrating a product of characters against Lebesgue is 1
or 0.  The along-walk estimator is the independent cross-check; it targets
the truncated solution's variance, which is itself computable exactly, so
truncation bias is a reported number rather than a hidden error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import BudgetExceededError, ValidationError
from .torus import (
    Frequency,
    GeneratorMeasure,
    MetricKind,
    TestFunction,
    TorusPoint,
    TrigPolynomial,
    as_point,
    frequency_action,
    wrap_unit,
)
from .walk import simulate_trajectory

EVAL_CHUNK = 2048


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    error: float
    method: str

    def __float__(self) -> float:
        return self.value


def mean_lebesgue(f, grid_count: int = 1 << 14) -> MeanEstimate:
    """Lebesgue mean: exact zero-coefficient for trig polynomials, golden
    lattice quadrature with a doubling error estimate otherwise."""
    if isinstance(f, TrigPolynomial):
        return MeanEstimate(value=f.mean, error=0.0, method="exact-enumeration")
    dimension = getattr(f, "dimension", None)
    if dimension is None:
        raise ValidationError("f", "need a TestFunction or TrigPolynomial")
    coarse = float(np.mean(f.evaluate(_golden_lattice(dimension, grid_count // 2))))
    fine = float(np.mean(f.evaluate(_golden_lattice(dimension, grid_count))))
    return MeanEstimate(
        value=fine, error=2.0 * abs(fine - coarse) + 1e-15, method="monte-carlo")


def _golden_lattice(dimension: int, count: int) -> np.ndarray:
    primes = np.asarray([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37][:dimension])
    alphas = np.sqrt(primes.astype(np.float64)) % 1.0
    k = np.arange(1, count + 1, dtype=np.float64)
    return (k[:, None] * alphas[None, :]) % 1.0


def transfer_poly(rho: GeneratorMeasure, f: TrigPolynomial, steps: int = 1,
                  max_atoms: int = 1 << 21) -> TrigPolynomial:
    """P^steps f in frequency space: e_a -> sum_g w_g e_{g^T a}, merged."""
    if steps < 0:
        raise ValidationError("steps", "negative power")
    current: dict[Frequency, complex] = dict(f.coeffs)
    for _ in range(steps):
        nxt: dict[Frequency, complex] = {}
        for freq, c in current.items():
            for mat, w in rho.atoms:
                img = frequency_action(mat, freq)
                nxt[img] = nxt.get(img, 0j) + c * float(w)
        if len(nxt) > max_atoms:
            raise BudgetExceededError(required=len(nxt), budget=max_atoms,
                                      what="frequencies")
        current = nxt
    if not current:
        current = {Frequency.of((0,) * f.dimension): 0j}
    return TrigPolynomial.from_dict(current, gamma=f.gamma)


def poly_pair_integral(p: TrigPolynomial, q: TrigPolynomial) -> complex:
    """Integral of p q against Lebesgue: sum_a p(a) q(-a), exact pairing."""
    table = {a.vec: c for a, c in q.coeffs}
    total = 0j
    for a, c in p.coeffs:
        mirror = table.get(tuple(-v for v in a.vec))
        if mirror is not None:
            total += c * mirror
    return total


def _frac_complex(c: complex) -> tuple[Fraction, Fraction]:
    return Fraction(c.real), Fraction(c.imag)


def correlation_exact(rho: GeneratorMeasure, f: TrigPolynomial, l: int,
                      max_atoms: int = 1 << 21) -> Fraction:
    """Integral of f P^l f against Lebesgue, as an exact rational.

    Coefficients of f are floats, hence exact rationals; propagation weights
    are exact; the character pairing is 0/1.  The imaginary part must cancel
    identically for real f and is asserted to.
    """
    series = correlation_sequence(rho, f, l, max_atoms=max_atoms)
    return series[l]


def correlation_sequence(rho: GeneratorMeasure, f: TrigPolynomial, l_max: int,
                         max_atoms: int = 1 << 21) -> list[Fraction]:
    """[integral of f P^l f]_{l=0..l_max}, one exact propagation pass."""
    if l_max < 0:
        raise ValidationError("l_max", "negative lag")
    source = {a: _frac_complex(c) for a, c in f.coeffs}
    target = {tuple(-v for v in a.vec): _frac_complex(c) for a, c in f.coeffs}
    state: dict[Frequency, tuple[Fraction, Fraction]] = dict(source)
    out: list[Fraction] = []
    for l in range(l_max + 1):
        re_sum, im_sum = Fraction(0), Fraction(0)
        for freq, (re_b, im_b) in state.items():
            hit = target.get(freq.vec)
            if hit is None:
                continue
            re_a, im_a = hit
            re_sum += re_a * re_b - im_a * im_b
            im_sum += re_a * im_b + im_a * re_b
        if im_sum != 0:
            raise ValidationError("f", "correlation has nonzero imaginary part")
        out.append(re_sum)
        if l == l_max:
            break
        nxt: dict[Frequency, tuple[Fraction, Fraction]] = {}
        for freq, (re_b, im_b) in state.items():
            for mat, w in rho.atoms:
                img = frequency_action(mat, freq)
                acc = nxt.get(img)
                if acc is None:
                    nxt[img] = (re_b * w, im_b * w)
                else:
                    nxt[img] = (acc[0] + re_b * w, acc[1] + im_b * w)
        if len(nxt) > max_atoms:
            raise BudgetExceededError(required=len(nxt), budget=max_atoms,
                                      what="frequencies")
        state = nxt
    return out


@dataclass(frozen=True)
class VarianceReport:
    sigma2: float
    method: str
    terms: tuple[float, ...]
    truncation: int
    uncertainty: float
    sigma2_exact: Fraction | None = None
    decay_rate: float | None = None
    seed: int | None = None
    max_step_term: float | None = None

    def __post_init__(self):
        if self.sigma2 < -self.uncertainty - 1e-12:
            raise ValidationError("sigma2", "below the negative uncertainty guard")

    def to_json_dict(self) -> dict:
        return {
            "sigma2": self.sigma2,
            "method": self.method,
            "terms": list(self.terms),
            "truncation": self.truncation,
            "uncertainty": self.uncertainty,
            "decay_rate": self.decay_rate,
            "seed": self.seed,
            "max_step_term": self.max_step_term,
        }


def variance_series(rho: GeneratorMeasure, f: TrigPolynomial, l_max: int,
                    max_atoms: int = 1 << 21) -> VarianceReport:
    """sigma^2 = -int f^2 + 2 sum_{l<=L} int f P^l f, all terms exact.

    The tail is not assumed away: the observed geometric decay rate of the
    nonzero terms produces the uncertainty; identically vanishing tails give
    uncertainty zero.
    """
    fc = f.centered()
    if abs(fc.mean) > 1e-12:
        raise ValidationError("f", "centering failed")
    terms = correlation_sequence(rho, fc, l_max, max_atoms=max_atoms)
    sigma2 = -terms[0] + 2 * sum(terms)
    decay_rate, tail = _geometric_tail(terms)
    return VarianceReport(
        sigma2=float(sigma2),
        method="series:exact-enumeration",
        terms=tuple(float(t) for t in terms),
        truncation=l_max,
        uncertainty=tail,
        sigma2_exact=sigma2,
        decay_rate=decay_rate,
    )


def _geometric_tail(terms: Sequence[Fraction]) -> tuple[float | None, float]:
    mags = [abs(float(t)) for t in terms[1:]]
    nonzero = [(i + 1, m) for i, m in enumerate(mags) if m > 0]
    if not nonzero:
        return 0.0, 0.0
    if len(nonzero) == 1:
        # one isolated nonzero lag: no observable rate, quote the term itself
        return None, 2.0 * nonzero[-1][1]
    (l0, m0), (l1, m1) = nonzero[0], nonzero[-1]
    if l1 == l0:
        return None, 2.0 * m1
    rate = (m1 / m0) ** (1.0 / (l1 - l0))
    if rate >= 1.0:
        return rate, math.inf
    return rate, 2.0 * m1 * rate / (1.0 - rate)


@dataclass(frozen=True)
class PoissonSolution:
    """Truncated Neumann solution g = sum_{n<N} P^n (f - mean) as a trig poly.

    g - Pg = f_c - P^N f_c holds at the coefficient level; the last term is
    kept as `residual_poly` so the defect is evaluatable anywhere.
    """

    f_centered: TrigPolynomial
    g: TrigPolynomial
    n_terms: int
    mean: float
    residual_poly: TrigPolynomial

    def g_at(self, x) -> float:
        return float(self.g(as_point(x, self.g.dimension)))

    def residual_at(self, x) -> float:
        return abs(float(self.residual_poly(as_point(x, self.g.dimension))))

    def evaluator(self) -> Callable[[np.ndarray], np.ndarray]:
        return lambda pts: _eval_chunked(self.g, pts)

    def tail_report(self) -> list[float]:
        """Certified coefficient-mass (l1) bound per truncation level tail."""
        return [float(np.sum(np.abs(self.residual_poly.coefficients)))]


def _eval_chunked(poly: TrigPolynomial, pts: np.ndarray,
                  chunk: int = EVAL_CHUNK) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if len(pts) <= chunk:
        return poly.evaluate(pts)
    out = np.empty(len(pts), dtype=np.float64)
    for lo in range(0, len(pts), chunk):
        out[lo:lo + chunk] = poly.evaluate(pts[lo:lo + chunk])
    return out


def poisson_solve(rho: GeneratorMeasure, f: TrigPolynomial,
                  n_terms: int | None = None, x=None, target: float = 0.01,
                  n_cap: int = 18, max_atoms: int = 1 << 21) -> PoissonSolution:
    """Build the truncated solution.

    With n_terms given, the truncation is fixed.  Otherwise it grows until
    the residual |P^N f_c(x)| at the point of interest drops below
    target times the certified Holder bound of f (the measured-decay rule),
    or the frequency budget is hit.
    """
    mean = mean_lebesgue(f)
    fc = f.centered()
    if abs(fc.mean) > 1e-12:
        raise ValidationError("f", "centering failed")

    if n_terms is not None:
        powers = _transfer_powers(rho, fc, n_terms, max_atoms)
        return _assemble(fc, powers, n_terms, mean.value)

    if x is None:
        raise ValidationError("x", "adaptive truncation needs the point x")
    x = as_point(x, f.dimension)
    bound = f.holder_upper_bound() or 1.0
    powers = [fc]
    for n in range(1, n_cap + 1):
        powers.append(transfer_poly(rho, powers[-1], 1, max_atoms=max_atoms))
        if abs(float(powers[-1](x))) <= target * bound:
            return _assemble(fc, powers, n, mean.value)
    return _assemble(fc, powers, n_cap, mean.value)


def _transfer_powers(rho, fc, n_terms, max_atoms) -> list[TrigPolynomial]:
    powers = [fc]
    for _ in range(n_terms):
        powers.append(transfer_poly(rho, powers[-1], 1, max_atoms=max_atoms))
    return powers


def _assemble(fc, powers, n_terms, mean) -> PoissonSolution:
    coeffs: dict[Frequency, complex] = {}
    for poly in powers[:n_terms]:
        for a, c in poly.coeffs:
            coeffs[a] = coeffs.get(a, 0j) + c
    g = TrigPolynomial.from_dict(coeffs, gamma=fc.gamma)
    return PoissonSolution(
        f_centered=fc, g=g, n_terms=n_terms, mean=mean,
        residual_poly=powers[n_terms],
    )


def poisson_solve_at(rho: GeneratorMeasure, f: TrigPolynomial, x, n_terms: int,
                     max_atoms: int = 1 << 21) -> tuple[float, float]:
    """(g(x), |f_c(x) - (g - Pg)(x)|) with Pg one extra exact transfer."""
    sol = poisson_solve(rho, f, n_terms=n_terms, max_atoms=max_atoms)
    x = as_point(x, f.dimension)
    g_x = float(sol.g(x))
    pg_x = float(transfer_poly(rho, sol.g, 1, max_atoms=max_atoms)(x))
    fc_x = float(sol.f_centered(x))
    return g_x, abs(fc_x - (g_x - pg_x))


def solution_variance_exact(rho: GeneratorMeasure, sol: PoissonSolution,
                            max_atoms: int = 1 << 21) -> float:
    """int g^2 - (Pg)^2 against Lebesgue by exact coefficient pairing.

    This is the exact estimand of the along-walk estimator for this
    truncated g, so the difference to a variance_series value is a
    reportable truncation bias, not a mystery.
    """
    pg = transfer_poly(rho, sol.g, 1, max_atoms=max_atoms)
    g2 = poly_pair_integral(sol.g, sol.g)
    pg2 = poly_pair_integral(pg, pg)
    value = g2.real - pg2.real
    if abs(g2.imag) + abs(pg2.imag) > 1e-10:
        raise ValidationError("g", "variance pairing has imaginary residue")
    return float(value)


def variance_along_walk(rho: GeneratorMeasure, g, x, n: int, seed: int,
                        trial: int = 0) -> VarianceReport:
    """Trajectory average of P(g^2)(X_k) - (Pg(X_k))^2.

    Both conditional moments are exact one-step sums over the support.  The
    quoted uncertainty is the last-quarter drift of the running average;
    checkpoint averages at n/4, n/2, 3n/4, n are reported as terms.
    """
    if n < 1:
        raise ValidationError("n", "need at least one step")
    g_eval = _as_evaluator(g)
    x = as_point(x, rho.dimension)
    traj = simulate_trajectory(rho, x, n, seed=seed, trial=trial)
    pts = traj.points[:n]
    weights = rho.weights_float()
    mats_t = [m.array.astype(np.float64).T for m in rho.matrices]

    pg = np.zeros(n)
    pg2 = np.zeros(n)
    for mt, w in zip(mats_t, weights):
        vals = np.asarray(g_eval(wrap_unit(pts @ mt)), dtype=np.float64)
        pg += w * vals
        pg2 += w * vals * vals
    step_terms = pg2 - pg * pg

    running = np.cumsum(step_terms) / np.arange(1, n + 1)
    checkpoints = [max(1, n // 4), max(1, n // 2), max(1, 3 * n // 4), n]
    terms = tuple(float(running[c - 1]) for c in checkpoints)
    drift = abs(terms[-1] - terms[-2])
    exact = None
    if isinstance(g, PoissonSolution):
        exact = Fraction(solution_variance_exact(rho, g))
    return VarianceReport(
        sigma2=float(running[-1]),
        method="along-walk:monte-carlo",
        terms=terms,
        truncation=n,
        uncertainty=float(drift + 1e-15),
        sigma2_exact=exact,
        seed=seed,
        max_step_term=float(np.max(step_terms)),
    )


def _as_evaluator(g) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(g, PoissonSolution):
        return g.evaluator()
    if isinstance(g, TrigPolynomial):
        return lambda pts: _eval_chunked(g, pts)
    if isinstance(g, TestFunction):
        return g.evaluate
    if callable(g):
        return g
    raise ValidationError("g", "not evaluatable")


def transfer_values(rho: GeneratorMeasure, func, x, k_max: int,
                    max_atoms: int = 1 << 21) -> np.ndarray:
    """[P^k func(x)]_{k=0..k_max} by exact word enumeration.

    func is any vectorized evaluator; infinities propagate (a singular hit
    makes the whole level infinite, which is the honest answer).
    """
    x = as_point(x, rho.dimension)
    required = rho.support_size**k_max
    if required > max_atoms:
        raise BudgetExceededError(required=required, budget=max_atoms)
    mats_t = [m.array.astype(np.float64).T for m in rho.matrices]
    w_step = rho.weights_float()
    pts = x.array[None, :]
    weights = np.ones(1)
    out = np.empty(k_max + 1)
    for k in range(k_max + 1):
        vals = np.asarray(func(pts), dtype=np.float64)
        out[k] = float(weights @ vals)
        if k == k_max:
            break
        pts = np.concatenate([wrap_unit(pts @ mt) for mt in mats_t], axis=0)
        weights = np.concatenate([weights * w for w in w_step])
    return out


def abel_partial_sums(rho: GeneratorMeasure, u_eval, x, n_max: int,
                      alpha: float, max_atoms: int = 1 << 21) -> tuple[np.ndarray, float]:
    """Partial sums sum_{k<=n} P^k(u - Pu)(x)/(k+1)^alpha and u(x).

    The claimed bound is partial <= u(x) for every n <= n_max.
    """
    pk = transfer_values(rho, u_eval, x, n_max + 1, max_atoms=max_atoms)
    diffs = pk[:-1] - pk[1:]
    damped = diffs / (1.0 + np.arange(n_max + 1)) ** alpha
    return np.cumsum(damped), float(pk[0])


def cesaro_damped_average(rho: GeneratorMeasure, func, x, n_max: int,
                          alpha: float = 0.5,
                          max_atoms: int = 1 << 21) -> np.ndarray:
    """(1/n) sum_{k<n} (1+k)^(-alpha) E|f(X_k)|, exactly, for n = 1..n_max.

    With a decreasing summable-in-average damping the weighted Cesaro mean
    of any bounded dominated function must go to zero.
    """
    if alpha <= 0:
        raise ValidationError("alpha", "must be positive")
    values = transfer_values(
        rho, lambda pts: np.abs(np.asarray(func(pts))), x, n_max - 1,
        max_atoms=max_atoms)
    weighted = values / (1.0 + np.arange(n_max)) ** alpha
    return np.cumsum(weighted) / np.arange(1, n_max + 1)


def domination_norm(f_eval, u_eval, p: float, sample: np.ndarray) -> float:
    """Sample sup of |f(x)| / u(x)^(1/p); a lower bound on the true norm."""
    if p < 1:
        raise ValidationError("p", "must be at least 1")
    pts = np.atleast_2d(np.asarray(sample, dtype=np.float64))
    fv = np.abs(np.asarray(f_eval(pts), dtype=np.float64))
    uv = np.asarray(u_eval(pts), dtype=np.float64)
    if np.any(~np.isfinite(uv)):
        raise ValidationError("sample", "u is not finite on the sample")
    return float(np.max(fv / uv ** (1.0 / p)))
