"""Fourier coefficients of walk laws, smoothing kernels, and W_gamma bounds.

The sign convention is hat(theta)(a) = sum w exp(-2 pi i <a, p>) everywhere
in the project.  Equidistribution is measured through decay of the profile
over a frequency box; the smoothing kernel is the normalized fourth power
of a Dirichlet-type sum, applied as a plain coefficient multiplier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .torus import (
    DistanceToPoint,
    Frequency,
    GeneratorMeasure,
    MetricKind,
    TestFunction,
    TorusPoint,
    TrigPolynomial,
    as_point,
    unit_grid,
)
from .walk import AtomicDistribution, ensemble_final_points, word_distribution_exact


def _dist_arrays(dist) -> tuple[np.ndarray, np.ndarray]:
    """(points, weights) from an AtomicDistribution or a point sample."""
    if isinstance(dist, AtomicDistribution):
        return dist.points, dist.weights_float()
    if isinstance(dist, tuple) and len(dist) == 2:
        pts = np.atleast_2d(np.asarray(dist[0], dtype=np.float64))
        w = np.asarray(dist[1], dtype=np.float64)
        if len(w) != len(pts):
            raise ValidationError("weights", "length does not match points")
        return pts, w
    pts = np.atleast_2d(np.asarray(dist, dtype=np.float64))
    return pts, np.full(len(pts), 1.0 / len(pts))


def empirical_fourier(dist, a) -> complex:
    """sum w exp(-2 pi i <a, p>) over the atoms or sample points."""
    freq = a if isinstance(a, Frequency) else Frequency.of(a)
    pts, w = _dist_arrays(dist)
    phase = pts @ np.asarray(freq.vec, dtype=np.float64)
    return complex(np.sum(w * np.exp(-2j * np.pi * phase)))


@dataclass(frozen=True)
class FourierProfile:
    """Coefficients over the box ||a||_inf <= a_max, lexicographically sorted."""

    entries: tuple[tuple[Frequency, complex], ...]
    normalizer: str
    a_max: int

    def entry(self, a) -> complex:
        freq = a if isinstance(a, Frequency) else Frequency.of(a)
        for f, v in self.entries:
            if f == freq:
                return v
        raise KeyError(freq)

    def _nonzero(self):
        return [(f, v) for f, v in self.entries if f.norm_inf() > 0]

    @property
    def peak_modulus(self) -> float:
        return max(abs(v) for f, v in self._nonzero())

    @property
    def peak_ratio(self) -> float:
        """max |hat(theta)(a)| / ||a||_inf over nonzero frequencies."""
        return max(abs(v) / f.norm_inf() for f, v in self._nonzero())

    @property
    def argmax(self) -> Frequency:
        """Frequency of the largest modulus; entries are lexicographically
        sorted so ties resolve to the first frequency deterministically."""
        best = None
        for f, v in self._nonzero():
            if best is None or abs(v) > best[1]:
                best = (f, abs(v))
        return best[0]

    def rows(self) -> list[dict]:
        return [
            {"a": list(f.vec), "re": v.real, "im": v.imag, "modulus": abs(v)}
            for f, v in self.entries
        ]


def frequency_box(a_max: int, dimension: int) -> list[Frequency]:
    """All integer frequencies with ||a||_inf <= a_max, sorted."""
    rng = range(-a_max, a_max + 1)
    idx = [rng] * dimension
    out = []
    mesh = np.meshgrid(*idx, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=-1)
    for row in sorted(map(tuple, flat.tolist())):
        out.append(Frequency.of(row))
    return out


def fourier_decay_profile(dist, a_max: int,
                          normalizer: str = "") -> tuple[FourierProfile, float]:
    """Scan the full box; return the profile and max |hat|/||a||_inf."""
    if a_max < 1:
        raise ValidationError("a_max", "must be at least 1")
    pts, w = _dist_arrays(dist)
    freqs = frequency_box(a_max, pts.shape[1])
    fmat = np.asarray([f.vec for f in freqs], dtype=np.float64)
    vals = (w[None, :] * np.exp(-2j * np.pi * (fmat @ pts.T))).sum(axis=1)
    entries = tuple((f, complex(v)) for f, v in zip(freqs, vals))
    profile = FourierProfile(entries=entries, normalizer=normalizer, a_max=a_max)
    return profile, profile.peak_ratio


def walk_profile_peaks(rho: GeneratorMeasure, x, n_values: Sequence[int],
                       a_max: int, exact_until: int = 20,
                       trials: int = 200_000, seed: int = 0,
                       max_atoms: int = 1 << 21) -> dict[int, FourierProfile]:
    """Fourier profile of the walk law at each n.

    Exact word enumeration up to `exact_until`; empirical laws from `trials`
    simulated endpoints beyond.  The per-n method is recorded in the
    profile's normalizer tag.
    """
    x = as_point(x, rho.dimension)
    out = {}
    for n in sorted(set(int(v) for v in n_values)):
        if n <= exact_until:
            dist = word_distribution_exact(rho, x, n, max_atoms=max_atoms)
            profile, _ = fourier_decay_profile(
                dist, a_max, normalizer=f"exact-enumeration:n={n}")
        else:
            pts = ensemble_final_points(rho, x, n, seed=seed, trials=trials)
            profile, _ = fourier_decay_profile(
                pts, a_max, normalizer=f"monte-carlo:n={n}:trials={trials}")
        out[n] = profile
    return out


@dataclass(frozen=True)
class JacksonKernel:
    """Normalized coefficients of the fourth-power Dirichlet kernel.

    One-dimensional; the d-dimensional kernel is the coordinate product.
    coeffs(0) = 1 and the support is exactly [-4m+2, 4m-2].
    """

    m: int
    coeffs: tuple[tuple[int, float], ...]

    def factor(self, k: int) -> float:
        lo = -4 * self.m + 2
        hi = 4 * self.m - 2
        if k < lo or k > hi:
            return 0.0
        return self.coeffs[k - lo][1]

    def factor_array(self, ks: np.ndarray) -> np.ndarray:
        lo = -4 * self.m + 2
        table = np.asarray([v for _, v in self.coeffs])
        ks = np.asarray(ks, dtype=np.int64)
        inside = (ks >= lo) & (ks <= 4 * self.m - 2)
        out = np.zeros(ks.shape, dtype=np.float64)
        out[inside] = table[ks[inside] - lo]
        return out

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        ys = np.asarray(y, dtype=np.float64)
        total = np.zeros(ys.shape, dtype=np.complex128)
        for k, v in self.coeffs:
            total += v * np.exp(2j * np.pi * k * ys)
        return total.real

    def to_json_dict(self) -> dict:
        return {"m": self.m, "coeffs": [[k, v] for k, v in self.coeffs]}


def jackson_kernel(m: int) -> JacksonKernel:
    """Expand (sum_{k=-m}^{m-1} e^{2 pi i k y})^4 and normalize.

    The base sum equals e^{-i pi y} sin(2 pi m y)/sin(pi y), so its fourth
    power carries a phase e^{-2 pi i (2y)}; multiplying by frequency +2
    recenters the support to [-4m+2, 4m-2] and makes the kernel the real
    nonnegative (sin(2 pi m y)/sin(pi y))^4.  Integer convolution keeps the
    coefficients exact before the single normalizing division.
    """
    if m < 1:
        raise ValidationError("m", "must be at least 1")
    ones = np.ones(2 * m, dtype=object)
    conv = ones
    for _ in range(3):
        conv = np.convolve(conv, ones)
    center = conv[4 * m - 2]
    coeffs = tuple(
        (j - (4 * m - 2), float(int(c)) / float(int(center)))
        for j, c in enumerate(conv)
    )
    return JacksonKernel(m=m, coeffs=coeffs)


def smooth_approx(f, m: int, grid_n: int | None = None) -> TrigPolynomial:
    """f * K_m in frequency space.

    Trig polynomials are transformed exactly (coefficient times the product
    of per-coordinate kernel factors).  Anything else is sampled on a grid
    and transformed by FFT; the grid must satisfy grid_n >= 16 m per axis
    (aliasing guard).  The zero coefficient is untouched either way, so the
    mean is preserved exactly.
    """
    kern = jackson_kernel(m)
    if isinstance(f, TrigPolynomial):
        out = {}
        for freq, c in f.coeffs:
            factor = 1.0
            for k in freq.vec:
                factor *= kern.factor(k)
            if factor != 0.0:
                out[freq] = c * factor
        if not out:
            out[Frequency.of((0,) * f.dimension)] = 0j
        return TrigPolynomial.from_dict(out, gamma=f.gamma)

    dimension = getattr(f, "dimension", None)
    if dimension is None:
        raise ValidationError("f", "need a TrigPolynomial or a TestFunction")
    if grid_n is None:
        grid_n = max(16 * m, 64)
    if grid_n < 16 * m:
        raise ValidationError("grid_n", f"grid {grid_n} below aliasing guard {16 * m}")

    samples = f.evaluate(unit_grid(grid_n, dimension)).reshape((grid_n,) * dimension)
    spectrum = np.fft.fftn(samples) / samples.size
    ks = np.fft.fftfreq(grid_n, d=1.0 / grid_n).astype(np.int64)
    for axis in range(dimension):
        shape = [1] * dimension
        shape[axis] = grid_n
        spectrum = spectrum * kern.factor_array(ks).reshape(shape)
    coeffs = {}
    nz = np.argwhere(np.abs(spectrum) > 1e-15)
    for idx in nz:
        freq = Frequency.of(int(ks[i]) for i in idx)
        coeffs[freq] = complex(spectrum[tuple(idx)])
    zero = Frequency.of((0,) * dimension)
    coeffs[zero] = complex(spectrum[(0,) * dimension])
    gamma = getattr(f, "gamma", 1.0)
    return TrigPolynomial.from_dict(coeffs, gamma=gamma)


class ScaledFunction(TestFunction):
    """Scalar multiple of a base function; the norm bound scales with it."""

    def __init__(self, base: TestFunction, scale: float, label: str = ""):
        self.base = base
        self.scale = scale
        self.label = label
        self.dimension = base.dimension
        self.gamma = base.gamma

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.scale * self.base.evaluate(points)

    def holder_upper_bound(self, metric: MetricKind = MetricKind.SUP) -> float | None:
        bound = self.base.holder_upper_bound(metric)
        return None if bound is None else abs(self.scale) * bound


def _integrate(f: TestFunction, dist) -> float:
    if dist == "lebesgue":
        if isinstance(f, TrigPolynomial):
            return f.mean
        pts = _lebesgue_proxy(f.dimension)
        return float(np.mean(f.evaluate(pts)))
    pts, w = _dist_arrays(dist)
    return float(w @ f.evaluate(pts))


def _lebesgue_proxy(dimension: int, count: int = 1 << 15) -> np.ndarray:
    """Fixed golden-lattice quadrature points standing in for Lebesgue."""
    primes = np.asarray([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37][:dimension])
    alphas = np.sqrt(primes.astype(np.float64)) % 1.0
    k = np.arange(1, count + 1, dtype=np.float64)
    return (k[:, None] * alphas[None, :]) % 1.0


def wasserstein_lower_bound(dist1, dist2, gamma: float,
                            dictionary: Sequence[TestFunction],
                            metric: MetricKind = MetricKind.SUP) -> float:
    """Certified lower bound: max over the dictionary of the mean gap,
    each member divided by its certified Holder-norm upper bound."""
    best = 0.0
    for f in dictionary:
        bound = f.holder_upper_bound(metric)
        if bound is None:
            raise ValidationError(
                "dictionary", "every member needs a certified norm bound")
        if bound <= 0:
            continue
        gap = abs(_integrate(f, dist1) - _integrate(f, dist2))
        best = max(best, gap / bound)
    return best


def default_dictionary(dimension: int, gamma: float = 1.0,
                       a_max: int = 4, distance_members: int = 32,
                       seed: int = 0x51C7,
                       metric: MetricKind = MetricKind.SUP) -> list[TestFunction]:
    """Unit-norm test battery: cos/sin at every frequency in the half box
    ||a||_inf <= a_max plus seeded distance-to-point functions."""
    members: list[TestFunction] = []
    for freq in frequency_box(a_max, dimension):
        if freq.norm_inf() == 0 or not _lex_positive(freq.vec):
            continue
        for maker in (TrigPolynomial.cosine, TrigPolynomial.sine):
            poly = maker(freq.vec, gamma=gamma)
            bound = poly.holder_upper_bound(metric)
            members.append(poly.scaled(1.0 / bound))
    for j in range(distance_members):
        coords = kernels.counter_uniforms(seed, j, 0, dimension)
        base = DistanceToPoint(
            center=TorusPoint.from_floats(coords), metric=metric, gamma=gamma)
        bound = base.holder_upper_bound(metric)
        members.append(ScaledFunction(base, 1.0 / bound, label=f"dist#{j}"))
    return members


def _lex_positive(vec: tuple[int, ...]) -> bool:
    for v in vec:
        if v > 0:
            return True
        if v < 0:
            return False
    return False


def psi_rate(t: float, c0: float, c1: float, phi) -> float:
    """(phi^{-1}(e^{c1 t}))^{-c0}: the decay profile scale; decreasing in t."""
    if c0 <= 0 or c1 <= 0:
        raise ValidationError("c0", "c0 and c1 must be positive")
    q = phi.inverse(math.exp(c1 * t))
    if q == 0.0:
        return math.inf
    return q ** (-c0)


def sobolev_norm_sq(f: TrigPolynomial, r: float | None = None) -> float:
    """Diagnostic sum |c_a|^2 (1+||a||_2)^(2r); r defaults to d+2."""
    if r is None:
        r = f.dimension + 2
    total = 0.0
    for freq, c in f.coeffs:
        total += abs(c) ** 2 * (1.0 + freq.norm_euclidean()) ** (2 * r)
    return total
