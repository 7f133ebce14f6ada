"""Variance-nullity detection: coset structure and exact bounded sums.

The support S of a measure has vanishing asymptotic variance for g exactly
when g is invariant under the group H generated by S S^-1 and S sits inside
a single coset H gamma.  Group membership is undecidable in general, so
everything here is a bounded search whose budgets travel with the result; a
missing certificate means "not found within budget", never "non-degenerate".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .torus import (
    CallbackFunction,
    DistanceToPoint,
    GeneratorMeasure,
    LatticeMatrix,
    MetricKind,
    TestFunction,
    TorusPoint,
    as_point,
    wrap_unit,
)
from .walk import simulate_trajectory


@dataclass(frozen=True)
class ClosureResult:
    """Bounded BFS closure of the group generated by S S^-1."""

    elements: tuple[LatticeMatrix, ...]
    complete: bool
    max_word_len: int
    max_elems: int

    @property
    def size(self) -> int:
        return len(self.elements)

    def contains(self, m: LatticeMatrix) -> bool:
        return m.entries in {el.entries for el in self.elements}


def product_set_closure(rho: GeneratorMeasure, max_word_len: int = 8,
                        max_elems: int = 4096) -> ClosureResult:
    """BFS of words in S S^-1 starting from the identity.

    The generator set {s t^-1} is closed under inversion, so the closure is
    symmetric by construction.  complete=True means the BFS stabilized
    within both budgets and the element list is the whole group.
    """
    if max_word_len < 1 or max_elems < 1:
        raise ValidationError("budget", "budgets must be positive")
    mats = rho.matrices
    gens: dict[tuple, LatticeMatrix] = {}
    for s in mats:
        for t in mats:
            g = s @ t.inverse()
            gens[g.entries] = g
    identity = LatticeMatrix.identity(rho.dimension)
    seen: dict[tuple, LatticeMatrix] = {identity.entries: identity}
    frontier = [identity]
    complete = False
    for _ in range(max_word_len):
        nxt = []
        for m in frontier:
            for g in gens.values():
                prod = g @ m
                if prod.entries not in seen:
                    if len(seen) >= max_elems:
                        return ClosureResult(tuple(seen.values()), False,
                                             max_word_len, max_elems)
                    seen[prod.entries] = prod
                    nxt.append(prod)
        if not nxt:
            complete = True
            break
        frontier = nxt
    return ClosureResult(tuple(seen.values()), complete, max_word_len, max_elems)


def invariance_check(h_set, g, sample: np.ndarray) -> float:
    """max over h and sample points of |g(h x) - g(x)|."""
    from .poisson import _as_evaluator

    g_eval = _as_evaluator(g)
    pts = np.atleast_2d(np.asarray(sample, dtype=np.float64))
    base = np.asarray(g_eval(pts), dtype=np.float64)
    elements = getattr(h_set, "elements", h_set)
    worst = 0.0
    for h in elements:
        moved = np.asarray(g_eval(wrap_unit(pts @ h.array.astype(np.float64).T)))
        worst = max(worst, float(np.max(np.abs(moved - base))))
    return worst


def degenerate_example() -> tuple[GeneratorMeasure, TestFunction, TestFunction]:
    """The worked zero-variance instance.

    rho = (1/2) delta_A + (1/2) delta_BA with A = (2 1; 1 1) and the order-4
    rotation B = (0 1; -1 0); g(x) = euclidean distance to 0.  B is a lattice
    isometry, so g(BAx) = g(Ax) pointwise: Pg(x) = g(Ax) exactly and
    f = g - Pg has vanishing conditional variance at every step.
    """
    a = LatticeMatrix(((2, 1), (1, 1)))
    b = LatticeMatrix(((0, 1), (-1, 0)))
    rho = GeneratorMeasure.uniform([a, b @ a])
    g = DistanceToPoint(center=TorusPoint.zero(2), metric=MetricKind.EUCLIDEAN)
    mats_t = [m.array.astype(np.float64).T for m in rho.matrices]
    weights = rho.weights_float()

    def f_fn(pts: np.ndarray) -> np.ndarray:
        base = g.evaluate(pts)
        pg = np.zeros(len(np.atleast_2d(pts)))
        for mt, w in zip(mats_t, weights):
            pg += w * g.evaluate(wrap_unit(np.atleast_2d(pts) @ mt))
        return base - pg

    f = CallbackFunction(fn=f_fn, dimension=2)
    return rho, g, f


def bounded_sum_verify(rho: GeneratorMeasure, g, x, n: int,
                       seed: int) -> tuple[float, float]:
    """(max |partial sum|, max telescoping defect) for f = g - Pg.

    Along a trajectory, sum_{k<m} f(X_k) should collapse to
    g(X_0) - g(X_m) whenever the per-step increments vanish; the second
    return value is the worst defect of that identity over all m <= n.
    """
    from .poisson import _as_evaluator

    g_eval = _as_evaluator(g)
    traj = simulate_trajectory(rho, x, n, seed=seed)
    pts = traj.points
    g_vals = np.asarray(g_eval(pts), dtype=np.float64)
    pg = np.zeros(n)
    for mat, w in rho.atoms:
        pg += float(w) * np.asarray(
            g_eval(wrap_unit(pts[:-1] @ mat.array.astype(np.float64).T)))
    partials = np.cumsum(g_vals[:-1] - pg)
    telescoped = g_vals[0] - g_vals[1:]
    residual = float(np.max(np.abs(partials - telescoped)))
    return float(np.max(np.abs(partials))), residual


@dataclass(frozen=True)
class CosetCertificate:
    """Bounded-search evidence that supp rho sits in one coset H gamma."""

    gamma: LatticeMatrix
    h_generators: tuple[LatticeMatrix, ...]
    max_word_len: int
    max_elems: int
    closure_size: int
    closure_complete: bool

    def to_json_dict(self) -> dict:
        return {
            "gamma": [list(r) for r in self.gamma.entries],
            "h_generators": [[list(r) for r in h.entries]
                             for h in self.h_generators],
            "max_word_len": self.max_word_len,
            "max_elems": self.max_elems,
            "closure_size": self.closure_size,
            "closure_complete": self.closure_complete,
        }


def find_coset_certificate(rho: GeneratorMeasure, max_word_len: int = 8,
                           max_elems: int = 4096) -> CosetCertificate | None:
    """Search for gamma in supp rho with s gamma^-1 in the bounded closure.

    gamma candidates are restricted to support atoms, which suffices when
    the coset structure holds at all with gamma in the support.  None means
    not found within budget, not a proof of non-degeneracy.
    """
    closure = product_set_closure(rho, max_word_len, max_elems)
    members = {el.entries for el in closure.elements}
    gens = []
    seen = set()
    for s in rho.matrices:
        for t in rho.matrices:
            g = s @ t.inverse()
            if g.entries not in seen:
                seen.add(g.entries)
                gens.append(g)
    for gamma in rho.matrices:
        gamma_inv = gamma.inverse()
        if all((s @ gamma_inv).entries in members for s in rho.matrices):
            return CosetCertificate(
                gamma=gamma, h_generators=tuple(gens),
                max_word_len=max_word_len, max_elems=max_elems,
                closure_size=closure.size,
                closure_complete=closure.complete,
            )
    return None


def grid_l2_norm(g, grid_n: int = 512, dimension: int = 2) -> float:
    """Grid-quadrature L2 norm on a uniform grid, for isometry checks."""
    from .poisson import _as_evaluator
    from .torus import unit_grid

    vals = np.asarray(_as_evaluator(g)(unit_grid(grid_n, dimension)))
    return float(math.sqrt(np.mean(vals**2)))
