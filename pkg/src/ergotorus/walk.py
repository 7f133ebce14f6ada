"""Trajectory simulation and exact distribution/transfer enumeration.

Two regimes, deliberately kept in one module so they can cross-check each
other: Monte Carlo trajectories driven by the counter-based stream (any
(seed, trial, step) cell is reproducible in isolation), and exact finite
enumerations of the n-step word distribution, which are cheap for small n
because the driving measure has finite support.
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
    TorusPoint,
    as_point,
    frequency_action,
    wrap_unit,
)

DEFAULT_BLOCK = 2048


@dataclass(frozen=True)
class Trajectory:
    """One walk realisation.  points[k] is X_k; word[k] drove X_k -> X_{k+1}."""

    start: TorusPoint
    points: np.ndarray
    word: np.ndarray
    seed: int
    trial: int
    rho_id: str
    exact_points: tuple[tuple[Fraction, ...], ...] | None = None

    @property
    def n(self) -> int:
        return len(self.word)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


def simulate_trajectory(rho: GeneratorMeasure, x, n: int, seed: int,
                        trial: int = 0) -> Trajectory:
    """Walk n steps from x.

    Rational starts are stepped in integer arithmetic modulo the start's
    common denominator (matrices in SL_d(Z) never grow it), so long rational
    orbits cannot drift; float starts use the fast kernel.  Both paths draw
    the same atom choices for a given (seed, trial).
    """
    x = as_point(x, rho.dimension)
    if n < 0:
        raise ValidationError("n", "negative step count")
    d = rho.dimension
    if x.exact is not None:
        word = kernels.atom_choices(seed, trial, 0, n, rho.cum_weights())
        den = math.lcm(*(f.denominator for f in x.exact))
        nums = [int(f * den) for f in x.exact]
        mats = [m.entries for m in rho.matrices]
        pts = np.empty((n + 1, d), dtype=np.float64)
        exact_list = [tuple(Fraction(v, den) for v in nums)]
        pts[0] = [v / den for v in nums]
        for k in range(n):
            rows = mats[word[k]]
            nums = [sum(r[j] * nums[j] for j in range(d)) % den for r in rows]
            exact_list.append(tuple(Fraction(v, den) for v in nums))
            pts[k + 1] = [v / den for v in nums]
        return Trajectory(
            start=x, points=pts, word=np.asarray(word, dtype=np.int64),
            seed=seed, trial=trial, rho_id=rho.content_hash(),
            exact_points=tuple(exact_list),
        )

    pts = np.empty((n + 1, d), dtype=np.float64)
    pts[0] = x.array
    words = np.empty((n, 1), dtype=np.int64)
    state = x.array[None, :].copy()
    if n:
        kernels.walk_block(
            rho.matrices_float(), rho.cum_weights(), state, seed,
            np.asarray([trial], dtype=np.uint64), 0, n,
            out_points=pts[1:].reshape(n, 1, d), out_words=words,
        )
    return Trajectory(
        start=x, points=pts, word=words.ravel(), seed=seed, trial=trial,
        rho_id=rho.content_hash(),
    )


def ensemble_birkhoff(
    rho: GeneratorMeasure,
    x,
    n: int,
    seed: int,
    trials: int,
    func: Callable[[np.ndarray], np.ndarray] | None = None,
    trial0: int = 0,
    checkpoints: Sequence[int] | None = None,
    block: int = DEFAULT_BLOCK,
) -> tuple[np.ndarray | None, dict[int, np.ndarray], np.ndarray]:
    """Birkhoff sums sum_{k<n} f(X_k) for `trials` independent walks.

    Returns (sums, snapshots, final_states); snapshots maps each checkpoint
    c to the per-trial partial sum over k < c.  Streaming in blocks keeps
    memory flat for n up to millions of steps.
    """
    x = as_point(x, rho.dimension)
    if n < 1:
        raise ValidationError("n", "need at least one step")
    if checkpoints is not None:
        if func is None:
            raise ValidationError("checkpoints", "checkpoints need a function")
        bad = [c for c in checkpoints if not (0 < c <= n)]
        if bad:
            raise ValidationError("checkpoints", f"outside (0, n]: {bad}")
    d = rho.dimension
    mats = rho.matrices_float()
    cum = rho.cum_weights()
    trial_ids = np.arange(trial0, trial0 + trials, dtype=np.uint64)
    state = np.tile(x.array, (trials, 1))

    want_sums = func is not None
    sums = None
    if want_sums:
        f0 = float(np.asarray(func(x.array[None, :]))[0])
        sums = np.full(trials, f0, dtype=np.float64)  # the k=0 term
    pending = sorted(set(checkpoints)) if checkpoints else []
    snapshots: dict[int, np.ndarray] = {}
    buf = np.empty((min(block, max(n, 1)), trials, d), dtype=np.float64)

    done = 0  # states 1..done have been generated
    while done < n:
        b = min(block, n - done)
        kernels.walk_block(mats, cum, state, seed, trial_ids, done, b,
                           out_points=buf[:b])
        if want_sums:
            values = np.asarray(func(buf[:b].reshape(b * trials, d)))
            values = values.reshape(b, trials)
            # State index of row j is done+1+j; it enters the Birkhoff sum
            # over k < n only while done+1+j <= n-1.
            live = min(b, n - 1 - done)
            while pending and pending[0] <= done + b:
                c = pending.pop(0)
                rows = c - done - 2  # rows 0..rows contribute f(X_{<=c-1})
                snap = sums.copy()
                if rows >= 0:
                    snap += values[: rows + 1].sum(axis=0)
                snapshots[c] = snap
            if live > 0:
                sums += values[:live].sum(axis=0)
        done += b
    return sums, snapshots, state


def ensemble_final_points(rho: GeneratorMeasure, x, n: int, seed: int,
                          trials: int, trial0: int = 0) -> np.ndarray:
    """The T end points X_n without recording intermediate states."""
    x = as_point(x, rho.dimension)
    state = np.tile(x.array, (trials, 1))
    trial_ids = np.arange(trial0, trial0 + trials, dtype=np.uint64)
    done = 0
    while done < n:
        b = min(8192, n - done)
        kernels.walk_block(rho.matrices_float(), rho.cum_weights(), state,
                           seed, trial_ids, done, b)
        done += b
    return state


@dataclass(frozen=True)
class AtomicDistribution:
    """Finitely supported distribution on the torus with exact weights.

    weight_num[i] / weight_den is the exact weight of points[i]; numerators
    are python ints so deep generations cannot overflow.
    """

    points: np.ndarray
    weight_num: tuple[int, ...]
    weight_den: int
    generation: int
    exact: tuple[tuple[Fraction, ...], ...] | None = None

    def __post_init__(self):
        if len(self.weight_num) != self.points.shape[0]:
            raise ValidationError("weight_num", "one weight per point required")
        if sum(self.weight_num) != self.weight_den:
            raise ValidationError("weight_num", "weights must sum to exactly 1")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def weights_float(self) -> np.ndarray:
        if self.weight_den <= 2**53:
            return np.asarray(self.weight_num, dtype=np.float64) / float(self.weight_den)
        return np.asarray(
            [float(Fraction(v, self.weight_den)) for v in self.weight_num],
            dtype=np.float64,
        )

    def weight_fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(v, self.weight_den) for v in self.weight_num)

    def expectation(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        values = np.asarray(func(self.points), dtype=np.float64)
        return float(values @ self.weights_float())


def _check_word_budget(rho: GeneratorMeasure, n: int, max_atoms: int) -> None:
    required = rho.support_size**n
    if required > max_atoms:
        raise BudgetExceededError(required=required, budget=max_atoms)


def word_distribution_exact(rho: GeneratorMeasure, x, n: int,
                            max_atoms: int = 1 << 21) -> AtomicDistribution:
    """The exact n-step distribution rho^(*n) * delta_x.

    For rational x equal atoms are merged under exact rational equality;
    float points are never merged (equality would not be trustworthy).
    """
    x = as_point(x, rho.dimension)
    if n < 0:
        raise ValidationError("n", "negative generation")
    _check_word_budget(rho, n, max_atoms)
    d = rho.dimension

    if x.exact is not None:
        current: dict[tuple[Fraction, ...], Fraction] = {tuple(x.exact): Fraction(1)}
        for _ in range(n):
            nxt: dict[tuple[Fraction, ...], Fraction] = {}
            for pt, wt in current.items():
                for mat, w in rho.atoms:
                    img = tuple(f % 1 for f in mat.apply_fractions(pt))
                    nxt[img] = nxt.get(img, Fraction(0)) + wt * w
            current = nxt
        keys = sorted(current)
        den = math.lcm(*(current[k].denominator for k in keys))
        nums = tuple(int(current[k] * den) for k in keys)
        pts = np.asarray([[float(f) for f in k] for k in keys], dtype=np.float64)
        return AtomicDistribution(points=pts, weight_num=nums, weight_den=den,
                                  generation=n, exact=tuple(keys))

    pts = x.array[None, :].copy()
    step_den = math.lcm(*(w.denominator for w in rho.weights))
    scaled = [int(w * step_den) for w in rho.weights]
    nums: list[int] = [1]
    den = 1
    mats_t = [m.array.astype(np.float64).T for m in rho.matrices]
    for _ in range(n):
        blocks = [wrap_unit(pts @ mt) for mt in mats_t]
        pts = np.concatenate(blocks, axis=0)
        nums = [v * s for s in scaled for v in nums]
        den *= step_den
    return AtomicDistribution(points=pts, weight_num=tuple(nums), weight_den=den,
                              generation=n)


def transfer_apply(rho: GeneratorMeasure, func, x) -> float:
    """(P f)(x) = sum_i w_i f(g_i x): exact one-step transfer."""
    x = as_point(x, rho.dimension)
    images = wrap_unit(rho.matrices_float() @ x.array)
    values = np.asarray(func(images), dtype=np.float64)
    return float(values @ rho.weights_float())


def transfer_power_apply(rho: GeneratorMeasure, func, x, k: int,
                         max_atoms: int = 1 << 21) -> float:
    """(P^k f)(x) by exact word enumeration."""
    dist = word_distribution_exact(rho, x, k, max_atoms)
    return dist.expectation(func)


@dataclass(frozen=True)
class FrequencyDistribution:
    """Exact distribution of a character index under the transpose action."""

    weights: tuple[tuple[Frequency, Fraction], ...]
    generation: int

    def __post_init__(self):
        total = sum(w for _, w in self.weights)
        if total != 1:
            raise ValidationError("weights", f"weights sum to {total}, not 1")
        ordered = tuple(sorted(self.weights, key=lambda item: item[0].vec))
        object.__setattr__(self, "weights", ordered)

    @property
    def size(self) -> int:
        return len(self.weights)

    def as_dict(self) -> dict[Frequency, Fraction]:
        return dict(self.weights)

    def weight_of(self, a: Frequency) -> Fraction:
        return self.as_dict().get(a, Fraction(0))


def character_propagate(rho: GeneratorMeasure, a: Frequency, l: int,
                        max_atoms: int = 1 << 21) -> FrequencyDistribution:
    """Distribution of the frequency after l steps of a -> g^T a.

    This is the exact frequency-side image of P^l acting on the character
    e_a; merged under integer equality, so recurrent frequency orbits stay
    small.
    """
    if l < 0:
        raise ValidationError("l", "negative power")
    _check_word_budget(rho, l, max_atoms)
    current: dict[Frequency, Fraction] = {a: Fraction(1)}
    for _ in range(l):
        nxt: dict[Frequency, Fraction] = {}
        for freq, wt in current.items():
            for mat, w in rho.atoms:
                img = frequency_action(mat, freq)
                nxt[img] = nxt.get(img, Fraction(0)) + wt * w
        current = nxt
    return FrequencyDistribution(weights=tuple(current.items()), generation=l)


@dataclass(frozen=True)
class OrbitResult:
    """Finite orbit of a rational point with its exact transition matrix."""

    states: tuple[TorusPoint, ...]
    transition: tuple[tuple[Fraction, ...], ...]

    @property
    def size(self) -> int:
        return len(self.states)

    def points_array(self) -> np.ndarray:
        return np.asarray([s.coords for s in self.states], dtype=np.float64)

    def uniform_mean(self, func) -> float:
        """Orbit average of f.

        Each generator permutes the finite orbit, so the chain is doubly
        stochastic and the uniform measure is its stationary law.
        """
        values = np.asarray(func(self.points_array()), dtype=np.float64)
        return float(values.mean())


def rational_orbit(rho: GeneratorMeasure, x, max_states: int = 100_000) -> OrbitResult:
    """Breadth-first closure of a rational start under the support."""
    x = as_point(x, rho.dimension)
    if x.exact is None:
        raise ValidationError("x", "rational_orbit needs an exact rational point")
    start = tuple(x.exact)
    index: dict[tuple[Fraction, ...], int] = {start: 0}
    order: list[tuple[Fraction, ...]] = [start]
    edges: list[list[tuple[int, Fraction]]] = []
    head = 0
    while head < len(order):
        pt = order[head]
        row: list[tuple[int, Fraction]] = []
        for mat, w in rho.atoms:
            img = tuple(f % 1 for f in mat.apply_fractions(pt))
            if img not in index:
                if len(order) >= max_states:
                    raise BudgetExceededError(required=len(order) + 1,
                                              budget=max_states, what="states")
                index[img] = len(order)
                order.append(img)
            row.append((index[img], w))
        edges.append(row)
        head += 1

    size = len(order)
    transition = []
    for row in edges:
        dense = [Fraction(0)] * size
        for j, w in row:
            dense[j] += w
        transition.append(tuple(dense))
    states = tuple(TorusPoint.from_fractions(pt) for pt in order)
    return OrbitResult(states=states, transition=tuple(transition))
