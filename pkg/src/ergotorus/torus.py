"""Points on the d-torus, integer matrices acting on them, and test functions.

Everything downstream (walks, transfer operators, height functions) is built
from the types here.  Conventions fixed once for the whole package:

* torus points live in [0, 1)^d; the metric is the quotient metric
  d(x, y) = inf_p ||x - y - p|| over integer translates p,
* the default norm is the sup norm (euclidean is selectable everywhere),
* a matrix g acts by x -> g x mod 1; on characters this is the transpose
  action a -> g^T a.

Points may carry exact rational coordinates next to their float ones.  When
present, the exact representation is authoritative: arithmetic is done on the
fractions and the floats are re-derived, so long orbits of rational points do
not drift.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, ValidationError

# Tolerated float/exact disagreement for points carrying both representations.
EXACT_AGREEMENT = 2.0**-50


class MetricKind(str, Enum):
    SUP = "sup_norm"
    EUCLIDEAN = "euclidean"


def wrap_unit(values: np.ndarray) -> np.ndarray:
    """Map reals into [0, 1).  Guards against y - floor(y) rounding to 1.0."""
    out = values - np.floor(values)
    if out.ndim == 0:
        return out - 1.0 if out >= 1.0 else out
    out[out >= 1.0] -= 1.0
    return out


def wrapped_gap(diff: np.ndarray, metric: MetricKind = MetricKind.SUP) -> np.ndarray:
    """Distance to the nearest integer translate of 0 for raw differences.

    `diff` has shape (..., d); the reduction runs over the last axis.  For
    separable norms the per-coordinate nearest translate is the global
    infimum, so this equals the 3^d-translate enumeration exactly.
    """
    t = np.asarray(diff, dtype=np.float64)
    t = t - np.floor(t)
    t = np.where(t >= 1.0, t - 1.0, t)
    w = np.minimum(t, 1.0 - t)
    if metric is MetricKind.SUP:
        return w.max(axis=-1)
    return np.sqrt((w * w).sum(axis=-1))


def _coerce_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise ValidationError("exact", f"not a rational value: {value!r}")


@dataclass(frozen=True)
class TorusPoint:
    """A point of T^d = R^d / Z^d.

    coords: floats in [0, 1).
    exact:  optional tuple of Fractions in [0, 1) agreeing with coords to
            2^-50.  Fractions are kept reduced by construction.
    """

    coords: tuple[float, ...]
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if not self.coords:
            raise ValidationError("coords", "empty point")
        for c in self.coords:
            if not (0.0 <= c < 1.0) or not math.isfinite(c):
                raise ValidationError("coords", f"coordinate {c!r} outside [0, 1)")
        if self.exact is not None:
            if len(self.exact) != len(self.coords):
                raise DimensionMismatchError("exact", len(self.coords), len(self.exact))
            for c, f in zip(self.coords, self.exact):
                if not (0 <= f < 1):
                    raise ValidationError("exact", f"fraction {f} outside [0, 1)")
                if abs(float(f) - c) > EXACT_AGREEMENT:
                    raise ValidationError(
                        "exact", f"fraction {f} disagrees with float coordinate {c}"
                    )

    @classmethod
    def from_floats(cls, values: Sequence[float]) -> "TorusPoint":
        arr = wrap_unit(np.asarray(values, dtype=np.float64))
        if arr.ndim != 1:
            raise ValidationError(
                "point", f"expected one point, got an array of shape {arr.shape}"
            )
        return cls(coords=tuple(float(v) for v in arr))

    @classmethod
    def from_fractions(cls, values: Sequence) -> "TorusPoint":
        fracs = tuple(_coerce_fraction(v) % 1 for v in values)
        return cls(coords=tuple(float(f) for f in fracs), exact=fracs)

    @classmethod
    def zero(cls, dimension: int) -> "TorusPoint":
        return cls.from_fractions([Fraction(0)] * dimension)

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)

    @property
    def is_rational(self) -> bool:
        return self.exact is not None

    def denominator_lcm(self) -> int:
        if self.exact is None:
            raise ValidationError("exact", "point has no exact representation")
        return math.lcm(*(f.denominator for f in self.exact))


def as_point(x, dimension: int | None = None) -> TorusPoint:
    if isinstance(x, TorusPoint):
        return x
    pt = TorusPoint.from_floats(x)
    if dimension is not None and pt.dimension != dimension:
        raise DimensionMismatchError("point", dimension, pt.dimension)
    return pt


def _det_int(rows: list[list[int]]) -> int:
    """Exact integer determinant (fraction-free Bareiss elimination)."""
    n = len(rows)
    m = [list(r) for r in rows]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


@dataclass(frozen=True)
class LatticeMatrix:
    """Integer matrix with determinant exactly 1 (an invertible torus map)."""

    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        d = len(self.entries)
        if d < 2:
            raise ValidationError("entries", "dimension must be at least 2")
        for row in self.entries:
            if len(row) != d:
                raise DimensionMismatchError("entries", d, len(row))
            for v in row:
                if not isinstance(v, int):
                    raise ValidationError("entries", f"non-integer entry {v!r}")
        det = _det_int([list(r) for r in self.entries])
        if det != 1:
            raise ValidationError("entries", f"determinant is {det}, must be 1")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int]]) -> "LatticeMatrix":
        return cls(tuple(tuple(int(v) for v in row) for row in rows))

    @classmethod
    def from_flat(cls, values: Sequence[int], dimension: int | None = None) -> "LatticeMatrix":
        vals = [int(v) for v in values]
        if dimension is None:
            dimension = math.isqrt(len(vals))
        if dimension * dimension != len(vals):
            raise ValidationError("matrix", f"{len(vals)} entries do not fill a square")
        rows = [vals[i * dimension : (i + 1) * dimension] for i in range(dimension)]
        return cls.from_rows(rows)

    @classmethod
    def from_string(cls, text: str, dimension: int | None = None) -> "LatticeMatrix":
        """Parse a row-major whitespace-separated literal like "2 1 1 1"."""
        return cls.from_flat([int(tok) for tok in text.split()], dimension)

    @classmethod
    def identity(cls, dimension: int) -> "LatticeMatrix":
        return cls.from_rows(
            [[1 if i == j else 0 for j in range(dimension)] for i in range(dimension)]
        )

    @property
    def dimension(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.int64)

    def transpose(self) -> "LatticeMatrix":
        d = self.dimension
        return LatticeMatrix(tuple(tuple(self.entries[j][i] for j in range(d)) for i in range(d)))

    def __matmul__(self, other: "LatticeMatrix") -> "LatticeMatrix":
        if other.dimension != self.dimension:
            raise DimensionMismatchError("matmul", self.dimension, other.dimension)
        d = self.dimension
        a, b = self.entries, other.entries
        return LatticeMatrix(
            tuple(
                tuple(sum(a[i][k] * b[k][j] for k in range(d)) for j in range(d))
                for i in range(d)
            )
        )

    def inverse(self) -> "LatticeMatrix":
        """Exact inverse; integer because the determinant is 1."""
        d = self.dimension
        aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(d)]
               for i, row in enumerate(self.entries)]
        for col in range(d):
            pivot = next(r for r in range(col, d) if aug[r][col] != 0)
            aug[col], aug[pivot] = aug[pivot], aug[col]
            pv = aug[col][col]
            aug[col] = [v / pv for v in aug[col]]
            for r in range(d):
                if r != col and aug[r][col] != 0:
                    factor = aug[r][col]
                    aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
        inv_rows = []
        for r in range(d):
            row = []
            for v in aug[r][d:]:
                if v.denominator != 1:
                    raise ValidationError("entries", "inverse is not integral")
                row.append(int(v))
            inv_rows.append(row)
        return LatticeMatrix.from_rows(inv_rows)

    def operator_norm(self, metric: MetricKind = MetricKind.SUP) -> float:
        if metric is MetricKind.SUP:
            return float(max(sum(abs(v) for v in row) for row in self.entries))
        return float(np.linalg.norm(self.array.astype(np.float64), ord=2))

    def apply_fractions(self, fracs: Sequence[Fraction]) -> tuple[Fraction, ...]:
        if len(fracs) != self.dimension:
            raise DimensionMismatchError("point", self.dimension, len(fracs))
        return tuple(
            sum((Fraction(e) * f for e, f in zip(row, fracs)), start=Fraction(0))
            for row in self.entries
        )


@dataclass(frozen=True)
class Frequency:
    """An integer character index a; the character is e^(2 pi i <a, x>)."""

    vec: tuple[int, ...]

    def __post_init__(self):
        for v in self.vec:
            if not isinstance(v, int):
                raise ValidationError("vec", f"non-integer frequency entry {v!r}")

    @classmethod
    def of(cls, values: Sequence[int]) -> "Frequency":
        return cls(tuple(int(v) for v in values))

    @property
    def dimension(self) -> int:
        return len(self.vec)

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for v in self.vec)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vec, dtype=np.int64)

    def __neg__(self) -> "Frequency":
        return Frequency(tuple(-v for v in self.vec))

    def norm_inf(self) -> int:
        return max(abs(v) for v in self.vec)

    def norm_l1(self) -> int:
        return sum(abs(v) for v in self.vec)

    def norm_euclidean(self) -> float:
        return math.sqrt(sum(v * v for v in self.vec))


@dataclass(frozen=True)
class GeneratorMeasure:
    """Finitely supported probability measure on determinant-1 matrices.

    Weights are exact rationals summing to 1.  Duplicate matrices are merged
    and atoms are kept in a canonical sorted order so that equal measures
    hash identically.
    """

    atoms: tuple[tuple[LatticeMatrix, Fraction], ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValidationError("atoms", "measure needs at least one atom")
        d = self.atoms[0][0].dimension
        merged: dict[tuple, Fraction] = {}
        for mat, w in self.atoms:
            if mat.dimension != d:
                raise DimensionMismatchError("atoms", d, mat.dimension)
            w = _coerce_fraction(w)
            if w <= 0:
                raise ValidationError("atoms.weights", f"weight {w} is not positive")
            merged[mat.entries] = merged.get(mat.entries, Fraction(0)) + w
        total = sum(merged.values())
        if total != 1:
            raise ValidationError("atoms.weights", f"weights sum to {total}, not 1")
        canonical = tuple(
            (LatticeMatrix(entries), merged[entries]) for entries in sorted(merged)
        )
        object.__setattr__(self, "atoms", canonical)

    @classmethod
    def uniform(cls, matrices: Sequence[LatticeMatrix]) -> "GeneratorMeasure":
        w = Fraction(1, len(matrices))
        return cls(tuple((m, w) for m in matrices))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[LatticeMatrix, Fraction]]) -> "GeneratorMeasure":
        return cls(tuple(pairs))

    @property
    def dimension(self) -> int:
        return self.atoms[0][0].dimension

    @property
    def support_size(self) -> int:
        return len(self.atoms)

    @property
    def matrices(self) -> tuple[LatticeMatrix, ...]:
        return tuple(m for m, _ in self.atoms)

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(w for _, w in self.atoms)

    def weights_float(self) -> np.ndarray:
        return np.asarray([float(w) for w in self.weights], dtype=np.float64)

    def cum_weights(self) -> np.ndarray:
        cum = np.cumsum(self.weights_float())
        cum[-1] = 1.0  # guard against float undershoot in the last bin
        return cum

    def matrices_array(self) -> np.ndarray:
        return np.stack([m.array for m in self.matrices])

    def matrices_float(self) -> np.ndarray:
        return self.matrices_array().astype(np.float64)

    def inverted(self) -> "GeneratorMeasure":
        """The image measure under g -> g^(-1), with the same weights."""
        return GeneratorMeasure(tuple((m.inverse(), w) for m, w in self.atoms))

    def content_hash(self) -> str:
        text = ";".join(
            f"{ '|'.join(','.join(str(v) for v in row) for row in m.entries) }:{w}"
            for m, w in self.atoms
        )
        return hashlib.sha256(text.encode()).hexdigest()


def step(g: LatticeMatrix, x: TorusPoint) -> TorusPoint:
    """Apply x -> g x mod 1, propagating exact coordinates when present."""
    if g.dimension != x.dimension:
        raise DimensionMismatchError("step", g.dimension, x.dimension)
    if x.exact is not None:
        fracs = tuple(f % 1 for f in g.apply_fractions(x.exact))
        return TorusPoint(coords=tuple(float(f) for f in fracs), exact=fracs)
    y = wrap_unit(g.array.astype(np.float64) @ x.array)
    return TorusPoint(coords=tuple(float(v) for v in y))


def torus_distance(x: TorusPoint, y: TorusPoint | None = None,
                   metric: MetricKind = MetricKind.SUP) -> float:
    """Quotient-metric distance; exact infimum over integer translates."""
    if y is None:
        y = TorusPoint.zero(x.dimension)
    if y.dimension != x.dimension:
        raise DimensionMismatchError("distance", x.dimension, y.dimension)
    return float(wrapped_gap(x.array - y.array, metric))


def frequency_action(g: LatticeMatrix, a: Frequency) -> Frequency:
    """Character transport: e_a(g x) = e_{g^T a}(x)."""
    if g.dimension != a.dimension:
        raise DimensionMismatchError("frequency_action", g.dimension, a.dimension)
    gt = g.transpose().entries
    return Frequency(tuple(sum(row[j] * a.vec[j] for j in range(len(row))) for row in gt))


# --- test functions -------------------------------------------------------

def _metric_diameter(metric: MetricKind, dimension: int) -> float:
    if metric is MetricKind.SUP:
        return 0.5
    return 0.5 * math.sqrt(dimension)


def _char_seminorm_bound(freq: Frequency, gamma: float, metric: MetricKind) -> float:
    """Certified upper bound on the gamma-Holder seminorm of e_a.

    |e_a(x) - e_a(y)| <= min(2, 2 pi |a|_* d(x, y)); maximizing the ratio
    over d in (0, diam] gives the bound below.  |a|_* is the norm dual to
    the point metric.
    """
    if freq.is_zero:
        return 0.0
    dual = freq.norm_l1() if metric is MetricKind.SUP else freq.norm_euclidean()
    diam = _metric_diameter(metric, freq.dimension)
    if 2.0 * math.pi * dual * diam <= 2.0:
        return 2.0 * math.pi * dual * diam ** (1.0 - gamma)
    return 2.0 * (math.pi * dual) ** gamma


class TestFunction:
    """Common interface: vectorized evaluation plus Holder metadata.

    Subclasses set `dimension` and `gamma` and implement `evaluate` on
    (N, d) arrays of torus coordinates.
    """

    dimension: int
    gamma: float

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> float:
        pt = as_point(x, self.dimension)
        return float(self.evaluate(pt.array[None, :])[0])

    def holder_upper_bound(self, metric: MetricKind = MetricKind.SUP) -> float | None:
        """Certified upper bound on ||f||_gamma, or None if not available."""
        return None


@dataclass(frozen=True)
class TrigPolynomial(TestFunction):
    """f(x) = sum_a c_a e^(2 pi i <a, x>), stored as sorted (a, c_a) pairs."""

    coeffs: tuple[tuple[Frequency, complex], ...]
    gamma: float = 1.0

    def __post_init__(self):
        if not self.coeffs:
            raise ValidationError("coeffs", "empty trigonometric polynomial")
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError("gamma", f"{self.gamma} outside (0, 1]")
        d = self.coeffs[0][0].dimension
        seen = set()
        for a, _ in self.coeffs:
            if a.dimension != d:
                raise DimensionMismatchError("coeffs", d, a.dimension)
            if a.vec in seen:
                raise ValidationError("coeffs", f"duplicate frequency {a.vec}")
            seen.add(a.vec)
        ordered = tuple(sorted(self.coeffs, key=lambda item: item[0].vec))
        object.__setattr__(self, "coeffs", ordered)

    @classmethod
    def from_dict(cls, data: dict, gamma: float = 1.0) -> "TrigPolynomial":
        coeffs = []
        for key, value in data.items():
            freq = key if isinstance(key, Frequency) else Frequency.of(key)
            coeffs.append((freq, complex(value)))
        return cls(tuple(coeffs), gamma=gamma)

    @classmethod
    def constant(cls, value: float, dimension: int, gamma: float = 1.0) -> "TrigPolynomial":
        return cls(((Frequency.of([0] * dimension), complex(value)),), gamma=gamma)

    @classmethod
    def cosine(cls, freq: Sequence[int], gamma: float = 1.0) -> "TrigPolynomial":
        a = Frequency.of(freq)
        return cls(((a, 0.5 + 0j), (-a, 0.5 + 0j)), gamma=gamma)

    @classmethod
    def sine(cls, freq: Sequence[int], gamma: float = 1.0) -> "TrigPolynomial":
        a = Frequency.of(freq)
        return cls(((a, -0.5j), (-a, 0.5j)), gamma=gamma)

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return self.coeffs[0][0].dimension

    @property
    def coeff_dict(self) -> dict[Frequency, complex]:
        return dict(self.coeffs)

    @property
    def frequencies(self) -> np.ndarray:
        return np.stack([a.array for a, _ in self.coeffs])

    @property
    def coefficients(self) -> np.ndarray:
        return np.asarray([c for _, c in self.coeffs], dtype=np.complex128)

    @property
    def is_real(self) -> bool:
        table = {a.vec: c for a, c in self.coeffs}
        for a, c in self.coeffs:
            mirror = table.get(tuple(-v for v in a.vec))
            if mirror is None or abs(mirror - c.conjugate()) > 1e-12 * max(1.0, abs(c)):
                return False
        return True

    @property
    def mean(self) -> float:
        c0 = self.coeff_dict.get(Frequency.of([0] * self.dimension), 0j)
        return float(c0.real)

    def centered(self) -> "TrigPolynomial":
        zero = Frequency.of([0] * self.dimension)
        kept = tuple((a, c) for a, c in self.coeffs if a != zero)
        if not kept:
            kept = ((zero, 0j),)
        return TrigPolynomial(kept, gamma=self.gamma)

    def scaled(self, factor: complex) -> "TrigPolynomial":
        return TrigPolynomial(
            tuple((a, c * factor) for a, c in self.coeffs), gamma=self.gamma
        )

    def degree_inf(self) -> int:
        return max(a.norm_inf() for a, _ in self.coeffs)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        phases = pts @ self.frequencies.T.astype(np.float64)
        values = np.exp(2j * np.pi * phases) @ self.coefficients
        if self.is_real:
            return values.real
        return values

    def holder_upper_bound(self, metric: MetricKind = MetricKind.SUP) -> float:
        total = 0.0
        for a, c in self.coeffs:
            total += abs(c) * (1.0 + _char_seminorm_bound(a, self.gamma, metric))
        return total


@dataclass(frozen=True)
class DistanceToPoint(TestFunction):
    """f(x) = d(x, center) in the chosen metric; 1-Lipschitz by construction."""

    center: TorusPoint
    metric: MetricKind = MetricKind.SUP
    gamma: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError("gamma", f"{self.gamma} outside (0, 1]")

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return self.center.dimension

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return wrapped_gap(pts - self.center.array, self.metric)

    def holder_upper_bound(self, metric: MetricKind = MetricKind.SUP) -> float:
        # sup |f| <= diam; |f(x)-f(y)| <= d(x,y) <= d(x,y)^gamma diam^(1-gamma).
        diam = _metric_diameter(self.metric, self.dimension)
        if metric is not self.metric:
            # Lipschitz transfer between the two norms costs at most sqrt(d).
            lip = math.sqrt(self.dimension) if metric is MetricKind.SUP else 1.0
            return diam + lip * _metric_diameter(metric, self.dimension) ** (1.0 - self.gamma)
        return diam + diam ** (1.0 - self.gamma)


@dataclass(frozen=True)
class CallbackFunction(TestFunction):
    """Wraps an arbitrary vectorized callback; no certified norm bound."""

    fn: Callable[[np.ndarray], np.ndarray]
    dimension: int
    gamma: float = 1.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.asarray(self.fn(pts), dtype=np.float64)


def unit_grid(grid_n: int, dimension: int) -> np.ndarray:
    """The lattice (k_1/n, ..., k_d/n), flattened to (n^d, d)."""
    axes = [np.arange(grid_n, dtype=np.float64) / grid_n] * dimension
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def holder_norm_estimate(
    f: TestFunction,
    grid_n: int,
    metric: MetricKind = MetricKind.SUP,
    pair_budget: int = 200_000,
) -> tuple[float, float]:
    """Grid lower bound for (sup |f|, Holder seminorm).

    Every evaluated pair gives a valid lower bound for the seminorm, so the
    result never exceeds the true norm.  Along nested grids (doubling grid_n)
    with full pair enumeration the estimate is nondecreasing.
    """
    if grid_n < 2:
        raise ValidationError("grid_n", "need at least 2 grid points per axis")
    points = unit_grid(grid_n, f.dimension)
    n_pts = points.shape[0]
    if n_pts > 4_000_000:
        raise ValidationError("grid_n", f"grid of {n_pts} points is too large")
    values = np.asarray(f.evaluate(points), dtype=np.float64)
    sup_est = float(np.abs(values).max())

    total_pairs = n_pts * (n_pts - 1) // 2
    if total_pairs <= pair_budget:
        idx_a, idx_b = np.triu_indices(n_pts, k=1)
    else:
        rng = np.random.default_rng(0xE701 + grid_n)
        idx_a = rng.integers(0, n_pts, size=pair_budget)
        idx_b = rng.integers(0, n_pts, size=pair_budget)
    dist = wrapped_gap(points[idx_a] - points[idx_b], metric)
    keep = dist > 0
    if not np.any(keep):
        return sup_est, 0.0
    ratios = np.abs(values[idx_a][keep] - values[idx_b][keep]) / dist[keep] ** f.gamma
    return sup_est, float(ratios.max())
