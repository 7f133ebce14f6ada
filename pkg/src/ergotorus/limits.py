"""Statistical battery: LLN, CLT, LIL envelope, Lindeberg, fourth moments.

Asymptotic statements are downgraded to windowed desk-scale checks on
purpose: every threshold lives next to the seed that produced it.  The
normalizing variance is always supplied by the caller (from the exact
series), never fitted from the samples under test.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateVarianceError, ValidationError
from .poisson import _as_evaluator, mean_lebesgue
from .torus import GeneratorMeasure, TorusPoint, TrigPolynomial, wrap_unit
from .walk import Trajectory, ensemble_birkhoff, rational_orbit, simulate_trajectory


class MartingaleParts(NamedTuple):
    increments: np.ndarray
    boundary: float


def martingale_decompose(rho: GeneratorMeasure, g, traj: Trajectory) -> MartingaleParts:
    """Split the walk of g into martingale increments plus a boundary term.

    increments[k] = g(X_{k+1}) - Pg(X_k) with Pg the exact one-step sum, so
    sum of (g - Pg)(X_k) over k < n equals boundary + sum(increments) to
    float roundoff; tests assert the identity per trajectory.
    """
    if traj.n < 1:
        raise ValidationError("trajectory", "needs at least one step")
    g_eval = _as_evaluator(g)
    pts = traj.points
    g_vals = np.asarray(g_eval(pts), dtype=np.float64)
    pg = np.zeros(traj.n)
    for mat, w in rho.atoms:
        imgs = wrap_unit(pts[:-1] @ mat.array.astype(np.float64).T)
        pg += float(w) * np.asarray(g_eval(imgs), dtype=np.float64)
    increments = g_vals[1:] - pg
    return MartingaleParts(increments, float(g_vals[0] - g_vals[-1]))


class LlnResult(NamedTuple):
    birkhoff_mean: float
    target: float
    gap: float
    stderr: float


def lln_check(rho: GeneratorMeasure, f, x, n: int, trials: int,
              seed: int) -> LlnResult:
    """Birkhoff average over trials against the stationary target.

    An exact-rational start (coordinates given as Fraction or int) gets its
    target from the finite orbit chain, where uniform measure is stationary
    because every generator permutes the orbit.  Float starts target the
    Lebesgue mean.
    """
    if n < 1:
        raise ValidationError("n", "need at least one step")
    f_eval = _as_evaluator(f)
    coords = getattr(x, "exact", None) or getattr(x, "coords", x)
    exact_rational = (not np.isscalar(coords)) and all(
        isinstance(c, (int, Fraction)) for c in coords)
    if exact_rational:
        x_start = TorusPoint.from_fractions([Fraction(c) for c in coords])
        orbit = rational_orbit(rho, x_start)
        target = orbit.uniform_mean(f_eval)
    elif isinstance(f, TrigPolynomial):
        target = f.mean
        x_start = x
    else:
        target = mean_lebesgue(f).value
        x_start = x
    sums, _, _ = ensemble_birkhoff(rho, x_start, n, seed=seed, trials=trials,
                                   func=f_eval)
    means = sums / n
    birkhoff = float(means.mean())
    stderr = float(means.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return LlnResult(birkhoff, float(target), birkhoff - float(target), stderr)


def _chunked_birkhoff(rho, x, n, seed, trials, f_eval, checkpoints, threads):
    """ensemble_birkhoff split over trial chunks, merged by trial index.

    Per-trial streams are pure functions of (seed, trial), so the merge is
    bit-identical to a single call regardless of thread count or schedule.
    """
    if threads <= 1 or trials < 2 * threads:
        return ensemble_birkhoff(rho, x, n, seed=seed, trials=trials,
                                 func=f_eval, checkpoints=checkpoints)
    bounds = np.linspace(0, trials, threads + 1).astype(int)
    jobs = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda span: ensemble_birkhoff(
                rho, x, n, seed=seed, trials=span[1] - span[0], func=f_eval,
                checkpoints=checkpoints, trial0=span[0]),
            jobs))
    sums = np.concatenate([p[0] for p in parts])
    snaps = {}
    if checkpoints:
        for c in checkpoints:
            snaps[c] = np.concatenate([p[1][c] for p in parts])
    finals = np.concatenate([p[2] for p in parts])
    return sums, snaps, finals


def _normal_cdf(values: np.ndarray, sigma: float) -> np.ndarray:
    erf = np.vectorize(math.erf, otypes=[np.float64])
    return 0.5 * (1.0 + erf(values / (sigma * math.sqrt(2.0))))


def ks_distance_normal(samples: np.ndarray, sigma2: float) -> float:
    """One-sample KS distance to Normal(0, sigma2)."""
    if sigma2 <= 0:
        raise ValidationError("sigma2", "normal comparison needs sigma2 > 0")
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(xs)
    cdf = _normal_cdf(xs, math.sqrt(sigma2))
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max(np.max(grid_hi - cdf), np.max(cdf - grid_lo)))


DIRAC_WINDOW = 0.05


@dataclass(frozen=True)
class CltReport:
    n: int
    trials: int
    seed: int
    normalized_samples: tuple[float, ...]
    sigma2_ref: float
    ks_stat: float
    ks_stat_fitted: float
    mean_hat: float
    var_hat: float
    method: str

    def __post_init__(self):
        if not 0.0 <= self.ks_stat <= 1.0:
            raise ValidationError("ks_stat", "outside [0, 1]")
        if len(self.normalized_samples) != self.trials:
            raise ValidationError("normalized_samples", "trial count mismatch")

    def to_json_dict(self) -> dict:
        return {
            "n": self.n, "trials": self.trials, "seed": self.seed,
            "sigma2_ref": self.sigma2_ref, "ks_stat": self.ks_stat,
            "ks_stat_fitted": self.ks_stat_fitted, "mean_hat": self.mean_hat,
            "var_hat": self.var_hat, "method": self.method,
        }


def clt_experiment(rho: GeneratorMeasure, f, x, n: int, trials: int,
                   sigma2_ref: float, seed: int, threads: int = 1) -> CltReport:
    """Distribution of S_n/sqrt(n) over independent trajectories.

    ks_stat compares against Normal(0, sigma2_ref); ks_stat_fitted against
    Normal(0, var_hat), separating variance error from shape error.  A zero
    sigma2_ref switches the reference comparison to the Dirac mass at 0 and
    ks_stat becomes the sample mass outside a +-0.05 window.
    """
    if trials < 100:
        raise ValidationError("trials", "need at least 100")
    if sigma2_ref < 0:
        raise ValidationError("sigma2_ref", "negative variance")
    if isinstance(f, TrigPolynomial) and abs(f.mean) > 1e-12:
        raise ValidationError("f", "center f against its mean first")
    f_eval = _as_evaluator(f)
    sums, _, _ = _chunked_birkhoff(rho, x, n, seed, trials, f_eval, None,
                                   threads)
    normalized = sums / math.sqrt(n)
    mean_hat = float(normalized.mean())
    var_hat = float(normalized.var(ddof=1))
    if sigma2_ref > 0:
        ks = ks_distance_normal(normalized, sigma2_ref)
    else:
        ks = float(np.mean(np.abs(normalized) > DIRAC_WINDOW))
    ks_fit = ks_distance_normal(normalized, var_hat) if var_hat > 0 else 1.0
    return CltReport(
        n=n, trials=trials, seed=seed,
        normalized_samples=tuple(float(v) for v in normalized),
        sigma2_ref=sigma2_ref, ks_stat=ks, ks_stat_fitted=ks_fit,
        mean_hat=mean_hat, var_hat=var_hat, method="monte-carlo",
    )


def lil_checkpoints(n_max: int, base: int = 100, ratio: float = 1.5) -> tuple[int, ...]:
    """Geometric grid ceil(base * ratio^j) capped at n_max, n_max included."""
    if n_max < base:
        raise ValidationError("n_max", f"need at least {base}")
    out = []
    j = 0
    while True:
        c = math.ceil(base * ratio**j)
        if c > n_max:
            break
        out.append(c)
        j += 1
    if out[-1] != n_max:
        out.append(n_max)
    return tuple(out)


@dataclass(frozen=True)
class LilReport:
    trials: int
    seed: int
    sigma2_ref: float
    checkpoints: tuple[int, ...]
    values: np.ndarray  # (trials, len(checkpoints)) normalized statistics
    mean_offset: float

    @property
    def per_trajectory_max(self) -> np.ndarray:
        return self.values.max(axis=1)

    @property
    def per_trajectory_min(self) -> np.ndarray:
        return self.values.min(axis=1)

    @property
    def envelope_max(self) -> float:
        """Max over trajectories and the whole checkpoint window."""
        return float(self.values.max())

    @property
    def envelope_min(self) -> float:
        return float(self.values.min())

    @property
    def final_max(self) -> float:
        """Cross-trajectory max of the statistic at the final time."""
        return float(self.values[:, -1].max())

    @property
    def final_min(self) -> float:
        return float(self.values[:, -1].min())

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials, "seed": self.seed,
            "sigma2_ref": self.sigma2_ref,
            "checkpoints": list(self.checkpoints),
            "final_max": self.final_max, "final_min": self.final_min,
            "envelope_max": self.envelope_max, "envelope_min": self.envelope_min,
            "method": "monte-carlo",
        }


def lil_envelope(rho: GeneratorMeasure, f, x, n_max: int, trials: int,
                 sigma2_ref: float, seed: int, mean_offset: float = 0.0,
                 threads: int = 1) -> LilReport:
    """Normalized statistic S_n/sqrt(2 n sigma2 lnln n) on a geometric grid.

    The iterated-logarithm limit is asymptotic; this reports the whole
    window so callers can check the desk-scale envelope they care about
    (the acceptance check uses the cross-trajectory max at the final time).
    """
    if sigma2_ref <= 0:
        raise DegenerateVarianceError(sigma2_ref)
    checkpoints = lil_checkpoints(n_max)
    f_eval = _as_evaluator(f)
    _, snaps, _ = _chunked_birkhoff(rho, x, n_max, seed, trials, f_eval,
                                    checkpoints, threads)
    cols = []
    for c in checkpoints:
        denom = math.sqrt(2.0 * c * sigma2_ref * math.log(math.log(c)))
        cols.append((snaps[c] - c * mean_offset) / denom)
    values = np.stack(cols, axis=1)
    return LilReport(trials=trials, seed=seed, sigma2_ref=sigma2_ref,
                     checkpoints=checkpoints, values=values,
                     mean_offset=mean_offset)


@dataclass(frozen=True)
class LindebergReport:
    n_values: tuple[int, ...]
    estimates: tuple[float, ...]
    eps: float
    trials: int
    seed: int
    cutoff: int | None

    def to_json_dict(self) -> dict:
        return {
            "n_values": list(self.n_values), "estimates": list(self.estimates),
            "eps": self.eps, "trials": self.trials, "seed": self.seed,
            "cutoff": self.cutoff, "method": "monte-carlo",
        }


def lindeberg_check(rho: GeneratorMeasure, g, x, eps: float, seed: int,
                    n_values: Sequence[int] = (100, 1000, 10000),
                    trials: int = 32, g_sup: float | None = None) -> LindebergReport:
    """Truncated second moment (1/n) sum E[(g(X_{k+1})-Pg(X_k))^2; |.| >= eps sqrt(n)].

    For bounded g the increments never exceed 2 sup|g|, so the indicator is
    identically dead once n > (2 sup|g| / eps)^2; that exact cutoff is
    returned alongside the Monte Carlo estimates.
    """
    if eps <= 0:
        raise ValidationError("eps", "need a positive threshold")
    estimates = []
    for j, n in enumerate(n_values):
        level = eps * math.sqrt(n)
        acc = 0.0
        for t in range(trials):
            traj = simulate_trajectory(rho, x, n, seed=seed,
                                       trial=j * trials + t)
            inc = martingale_decompose(rho, g, traj).increments
            mask = np.abs(inc) >= level
            acc += float(np.sum(inc[mask] ** 2)) / n
        estimates.append(acc / trials)
    cutoff = None
    if g_sup is not None:
        cutoff = math.floor((2.0 * g_sup / eps) ** 2) + 1
    return LindebergReport(n_values=tuple(n_values),
                           estimates=tuple(estimates), eps=eps,
                           trials=trials, seed=seed, cutoff=cutoff)


@dataclass(frozen=True)
class FourthMomentRow:
    n: int
    fourth_moment: float
    second_moment: float
    kurtosis_ratio: float
    scaled_by_n2: float


def fourth_moment_scan(rho: GeneratorMeasure, f, x, n_list: Sequence[int],
                       trials: int, seed: int,
                       iid_control: bool = False) -> list[FourthMomentRow]:
    """E|S_n|^4 diagnostics: kurtosis ratio E S^4 / (3 (E S^2)^2) -> 1 under
    approximate normality, and E S^4 / n^2 stays bounded when E S^2 ~ n.

    iid_control replaces the walk by an i.i.d. uniform resample each step,
    the classical oracle the ratio is calibrated against.
    """
    f_eval = _as_evaluator(f)
    rows = []
    for j, n in enumerate(n_list):
        if iid_control:
            sums = _iid_sums(f_eval, rho.dimension, n, trials,
                             np.random.default_rng([seed, j]))
        else:
            sums, _, _ = ensemble_birkhoff(rho, x, n, seed=seed, trials=trials,
                                           func=f_eval, trial0=j * trials)
        m2 = float(np.mean(sums**2))
        m4 = float(np.mean(sums**4))
        ratio = m4 / (3.0 * m2 * m2) if m2 > 0 else 0.0
        rows.append(FourthMomentRow(n=n, fourth_moment=m4, second_moment=m2,
                                    kurtosis_ratio=ratio,
                                    scaled_by_n2=m4 / n**2))
    return rows


def _iid_sums(f_eval: Callable, dimension: int, n: int, trials: int,
              rng: np.random.Generator, block: int = 256) -> np.ndarray:
    sums = np.zeros(trials)
    done = 0
    while done < n:
        b = min(block, n - done)
        pts = rng.random((trials * b, dimension))
        vals = np.asarray(f_eval(pts), dtype=np.float64).reshape(trials, b)
        sums += vals.sum(axis=1)
        done += b
    return sums
