"""Experiment runner: parse a TOML config, execute one command, emit reports.

Every report embeds the sha256 of the raw config file, the effective seed,
the package version, and per-quantity method tags, so a result can always
be traced back to what produced it.  Outputs are byte-deterministic for a
fixed (config, seed): trial parallelism only changes wall time.

Exit codes: 0 success, 2 validation error, 3 budget exhaustion,
4 acceptance-threshold failure under --check.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, degeneracy, diophantine, limits, poisson, spectral
from .config import ExperimentConfig, load_config
from .errors import (
    BudgetExceededError,
    DegenerateVarianceError,
    ValidationError,
)
from .torus import TrigPolynomial
from .walk import simulate_trajectory


@dataclass
class RunContext:
    out_dir: Path
    seed: int
    threads: int
    check: bool
    config_sha256: str
    artifacts: list[str]
    failures: list[str]

    def require(self, ok: bool, message: str) -> None:
        if self.check and not ok:
            self.failures.append(message)


def _write_text(ctx: RunContext, name: str, text: str) -> None:
    path = ctx.out_dir / name
    path.write_text(text, encoding="utf-8", newline="\n")
    ctx.artifacts.append(name)


def _write_json(ctx: RunContext, name: str, payload: dict) -> None:
    _write_text(ctx, name, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(ctx: RunContext, name: str, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    _write_text(ctx, name, "\n".join(lines) + "\n")


def _coord_header(dimension: int, stem: str = "x") -> list[str]:
    return [f"{stem}_{i + 1}" for i in range(dimension)]


def cmd_simulate(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("simulate")
    n = int(blk.get("n", 1000))
    trials = int(blk.get("trials", 1))
    rho = cfg.measure()
    x = cfg.start_point()
    finals = []
    for t in range(trials):
        traj = simulate_trajectory(rho, x, n, seed=ctx.seed, trial=t)
        rows = []
        for k in range(n + 1):
            atom = int(traj.word[k]) if k < n else -1
            rows.append([k, *[float(v) for v in traj.points[k]], atom])
        _write_csv(ctx, f"trajectory_{t:03d}.csv",
                   ["step", *_coord_header(cfg.dimension), "atom_index"], rows)
        finals.append([float(v) for v in traj.points[-1]])
    return {"n": n, "trials": trials, "final_points": finals,
            "method": "monte-carlo:counter-rng"}


def _sigma2_reference(cfg: ExperimentConfig, blk: dict, f) -> tuple[float, str]:
    if "sigma2_ref" in blk:
        return float(blk["sigma2_ref"]), "config"
    if not isinstance(f, TrigPolynomial):
        raise ValidationError(
            "sigma2_ref", "needed explicitly: the function has no exact series")
    series_l = int(blk.get("series_l", 12))
    rep = poisson.variance_series(
        cfg.measure(), f, series_l,
        max_atoms=cfg.budget("max_atoms", 1 << 21))
    return rep.sigma2, f"series:exact-enumeration:L={series_l}"


def cmd_lln(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("lln")
    n = int(blk.get("n", 100_000))
    trials = int(blk.get("trials", 10))
    res = limits.lln_check(cfg.measure(), cfg.test_function(),
                           cfg.start_point(), n, trials, seed=ctx.seed)
    tol = float(blk.get("check_gap", 0.02))
    ctx.require(abs(res.gap) <= tol, f"|gap| {abs(res.gap)} > {tol}")
    return {"n": n, "trials": trials, "birkhoff_mean": res.birkhoff_mean,
            "target": res.target, "gap": res.gap, "stderr": res.stderr,
            "method": "monte-carlo;target:exact"}


def cmd_clt(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("clt")
    f = cfg.test_function()
    sigma2_ref, source = _sigma2_reference(cfg, blk, f)
    rep = limits.clt_experiment(
        cfg.measure(), f, cfg.start_point(), n=int(blk.get("n", 10_000)),
        trials=int(blk.get("trials", 2000)), sigma2_ref=sigma2_ref,
        seed=ctx.seed, threads=ctx.threads)
    _write_csv(ctx, "clt_samples.csv", ["trial", "normalized_sample"],
               [[t, v] for t, v in enumerate(rep.normalized_samples)])
    ks_tol = float(blk.get("check_ks", 0.05))
    ctx.require(rep.ks_stat < ks_tol, f"ks_stat {rep.ks_stat} >= {ks_tol}")
    if sigma2_ref > 0:
        ok = 0.8 * sigma2_ref <= rep.var_hat <= 1.2 * sigma2_ref
        ctx.require(ok, f"var_hat {rep.var_hat} outside [0.8, 1.2] x sigma2_ref")
    summary = rep.to_json_dict()
    summary["sigma2_source"] = source
    return summary


def cmd_lil(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("lil")
    f = cfg.test_function()
    sigma2_ref, source = _sigma2_reference(cfg, blk, f)
    rep = limits.lil_envelope(
        cfg.measure(), f, cfg.start_point(),
        n_max=int(blk.get("n_max", 1_000_000)),
        trials=int(blk.get("trials", 200)), sigma2_ref=sigma2_ref,
        seed=ctx.seed, threads=ctx.threads)
    rows = []
    for t in range(rep.trials):
        for j, c in enumerate(rep.checkpoints):
            rows.append([t, c, float(rep.values[t, j])])
    _write_csv(ctx, "lil_values.csv", ["trial", "checkpoint", "value"], rows)
    lo = float(blk.get("check_low", 0.6))
    hi = float(blk.get("check_high", 1.4))
    ctx.require(lo <= rep.final_max <= hi,
                f"final_max {rep.final_max} outside [{lo}, {hi}]")
    summary = rep.to_json_dict()
    summary["sigma2_source"] = source
    return summary


def cmd_variance(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    """Both estimators, always: series alone cannot expose truncation bias."""
    blk = cfg.block("variance")
    f = cfg.test_function()
    if not isinstance(f, TrigPolynomial):
        raise ValidationError("function.kind",
                              "variance needs a trigonometric polynomial")
    rho = cfg.measure()
    x = cfg.start_point()
    max_atoms = cfg.budget("max_atoms", 1 << 21)
    series = poisson.variance_series(rho, f, int(blk.get("series_l", 12)),
                                     max_atoms=max_atoms)
    sol = poisson.poisson_solve(rho, f, n_terms=int(blk.get("solution_terms", 10)),
                                max_atoms=max_atoms)
    walk = poisson.variance_along_walk(rho, sol, x,
                                       n=int(blk.get("walk_n", 100_000)),
                                       seed=ctx.seed)
    exact_target = poisson.solution_variance_exact(rho, sol,
                                                   max_atoms=max_atoms)
    bias = abs(exact_target - series.sigma2)
    combined = series.uncertainty + walk.uncertainty + bias
    gap = abs(series.sigma2 - walk.sigma2)
    ctx.require(gap <= 3.0 * combined,
                f"estimator gap {gap} > 3 x combined uncertainty {combined}")
    return {
        "series": series.to_json_dict(),
        "along_walk": walk.to_json_dict(),
        "solution_variance_exact": exact_target,
        "truncation_bias": bias,
        "combined_uncertainty": combined,
        "gap": gap,
    }


def cmd_dioph(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("dioph")
    x = cfg.start_point()
    q_max = int(blk.get("q_max", 50))
    phi = diophantine.PhiSpec(
        family="stretched_exp",
        exponent=float(blk.get("phi_exponent", 0.2)),
        scale=float(blk.get("phi_scale", 1.0)))
    rows = diophantine.approx_table(x, phi, q_max)
    header = ["q", *_coord_header(cfg.dimension, "p"), "dist", "phi_q",
              "height_term"]
    _write_csv(ctx, "dioph_table.csv", header,
               [[r["q"], *r["p"], r["dist"], r["phi_q"], r["height_term"]]
                for r in rows])
    report = diophantine.diophantine_check(
        x, B=float(blk.get("B", 1.0)), beta=float(blk.get("beta", 0.5)),
        q_max=q_max, q_min=int(blk.get("q_min", 2)))
    if blk.get("check_diophantine", False):
        ctx.require(report.verdict,
                    "rational approximations violate the diophantine condition")
    return {
        "q_max": q_max, "q_min": report.q_min, "B": report.B,
        "beta": report.beta, "verdict": report.verdict,
        "solutions": [
            {"q": s.q, "point": [float(c) for c in s.point.coords],
             "dist": s.dist}
            for s in report.solutions],
        "table_rows": len(rows),
        "method": "exact-enumeration",
    }


def cmd_fourier(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("fourier")
    n_values = [int(v) for v in blk.get("n_values", [5, 10, 15, 20])]
    profiles = spectral.walk_profile_peaks(
        cfg.measure(), cfg.start_point(), n_values,
        a_max=int(blk.get("a_max", 3)),
        exact_until=int(blk.get("exact_until", 20)),
        trials=int(blk.get("trials", 200_000)), seed=ctx.seed,
        max_atoms=cfg.budget("max_atoms", 1 << 21))
    peaks = []
    for n in n_values:
        prof = profiles[n]
        peaks.append({"n": n, "peak_modulus": prof.peak_modulus,
                      "argmax": list(prof.argmax.vec),
                      "method": prof.normalizer})
    final = profiles[n_values[-1]]
    _write_csv(ctx, "fourier_profile.csv",
               [*_coord_header(cfg.dimension, "a"), "re", "im", "modulus"],
               [[*r["a"], r["re"], r["im"], r["modulus"]]
                for r in final.rows()])
    if "jackson_m" in blk:
        kern = spectral.jackson_kernel(int(blk["jackson_m"]))
        _write_json(ctx, f"kernel_m{kern.m}.json", kern.to_json_dict())
    if "check_peak_below" in blk:
        bound = float(blk["check_peak_below"])
        ctx.require(final.peak_modulus < bound,
                    f"final peak {final.peak_modulus} >= {bound}")
    if "check_peak_above" in blk:
        bound = float(blk["check_peak_above"])
        ok = all(profiles[n].peak_modulus >= bound for n in n_values)
        ctx.require(ok, f"a profile peak fell below {bound}")
    return {"peaks": peaks, "a_max": final.a_max}


def _drift_u_delta_sample(count: int) -> np.ndarray:
    # log-spaced approach to the singular point along a fixed direction
    t = np.logspace(-4, math.log10(0.5), count)
    direction = np.asarray([1.0, math.sqrt(5) / 2 - 0.5])
    return np.outer(t, direction) % 1.0


def cmd_drift(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("drift")
    rho = cfg.measure()
    n_iter = int(blk.get("n_iter", 8))
    count = int(blk.get("sample_size", 500))
    max_atoms = cfg.budget("max_atoms", 1 << 21)
    results = {}

    delta = float(blk.get("delta", 0.3))
    fit = diophantine.drift_fit(
        rho, lambda pts: diophantine.u_delta_values(pts, delta),
        _drift_u_delta_sample(count), n_iter, max_atoms=max_atoms)
    results["u_delta"] = dataclasses.asdict(fit) | {"delta": delta}

    spec = diophantine.DriftSpec(
        delta=delta,
        phi=diophantine.PhiSpec(family="stretched_exp",
                                exponent=float(blk.get("phi_exponent", 0.2)),
                                scale=1.0),
        q_max=int(blk.get("q_max", 50)))
    u = diophantine.UPhi(spec, cfg.dimension)
    sample = diophantine.diophantine_sample(cfg.dimension, count,
                                            seed=ctx.seed)
    fit_phi = diophantine.drift_fit(rho, u.evaluate, sample, n_iter,
                                    max_atoms=max_atoms)
    results["u_phi"] = dataclasses.asdict(fit_phi) | {
        "q_max": spec.q_max, "lattice_size": u.lattice_size}

    for name, res in results.items():
        ctx.require(res["a_hat"] < 1.0, f"{name}: a_hat {res['a_hat']} >= 1")
        ctx.require(res["violations"] == 0,
                    f"{name}: {res['violations']} drift violations")
    results["method"] = "exact-enumeration"
    return results


def cmd_poisson(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("poisson")
    f = cfg.test_function()
    if not isinstance(f, TrigPolynomial):
        raise ValidationError("function.kind",
                              "poisson needs a trigonometric polynomial")
    rho = cfg.measure()
    x = cfg.start_point()
    max_atoms = cfg.budget("max_atoms", 1 << 21)
    if "n_terms" in blk:
        sol = poisson.poisson_solve(rho, f, n_terms=int(blk["n_terms"]),
                                    max_atoms=max_atoms)
    else:
        sol = poisson.poisson_solve(rho, f, x=x,
                                    target=float(blk.get("target", 0.01)),
                                    max_atoms=max_atoms)
    g_x, residual = poisson.poisson_solve_at(rho, f, x, sol.n_terms,
                                             max_atoms=max_atoms)
    tol = float(blk.get("check_residual", 0.05))
    ctx.require(residual <= tol, f"poisson residual {residual} > {tol}")
    return {
        "n_terms": sol.n_terms, "g_x": g_x, "residual": residual,
        "mean": sol.mean, "coefficients": len(sol.g.coeffs),
        "variance_exact": poisson.solution_variance_exact(rho, sol,
                                                          max_atoms=max_atoms),
        "method": "exact-enumeration",
    }


def cmd_degenerate_example(cfg: ExperimentConfig, ctx: RunContext) -> dict:
    blk = cfg.block("degenerate")
    n = int(blk.get("n", 100_000))
    seeds = int(blk.get("seeds", 10))
    rho, g, _ = degeneracy.degenerate_example()
    start = cfg.start_point()
    worst_partial = 0.0
    worst_residual = 0.0
    for s in range(seeds):
        max_partial, residual = degeneracy.bounded_sum_verify(
            rho, g, start, n, seed=ctx.seed + s)
        worst_partial = max(worst_partial, max_partial)
        worst_residual = max(worst_residual, residual)
    walk = poisson.variance_along_walk(rho, g, start, n, seed=ctx.seed)
    closure = degeneracy.product_set_closure(
        rho, cfg.budget("max_word_len", 8), cfg.budget("max_elems", 4096))
    sample = diophantine.diophantine_sample(2, 256, seed=ctx.seed)
    deviation = degeneracy.invariance_check(closure, g, sample)
    cert = degeneracy.find_coset_certificate(rho)
    bound = math.sqrt(2.0)
    ctx.require(worst_residual <= 1e-9,
                f"identity_residual {worst_residual} > 1e-9")
    ctx.require(worst_partial <= bound,
                f"max partial sum {worst_partial} > sqrt(2)")
    ctx.require(walk.max_step_term is not None
                and walk.max_step_term <= 1e-9,
                f"per-step variance term {walk.max_step_term} > 1e-9")
    return {
        "n": n, "seeds": seeds,
        "identity_residual": worst_residual,
        "max_abs_partial_sum": worst_partial,
        "partial_sum_bound": bound,
        "max_step_variance_term": walk.max_step_term,
        "invariance_deviation": deviation,
        "closure_size": closure.size,
        "closure_complete": closure.complete,
        "certificate": cert.to_json_dict() if cert else None,
        "method": "exact-enumeration;walk:monte-carlo",
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "lln": cmd_lln,
    "clt": cmd_clt,
    "lil": cmd_lil,
    "variance": cmd_variance,
    "dioph": cmd_dioph,
    "fourier": cmd_fourier,
    "drift": cmd_drift,
    "poisson": cmd_poisson,
    "degenerate-example": cmd_degenerate_example,
}


def _resolve_threads(arg_value: int | None) -> int:
    if arg_value is not None:
        return max(1, arg_value)
    env = os.environ.get("ERGOTORUS_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValidationError("ERGOTORUS_THREADS",
                                  f"not an integer: {env!r}") from exc
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergotorus",
        description="Random-walk-on-the-torus experiment runner")
    parser.add_argument("config_pos", nargs="?", metavar="CONFIG",
                        help="path to a TOML experiment file")
    parser.add_argument("command_pos", nargs="?", metavar="COMMAND",
                        help=f"one of: {', '.join(sorted(COMMANDS))}")
    parser.add_argument("--config", help="config path (overrides positional)")
    parser.add_argument("--command", help="command (overrides positional)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int,
                        help="trial parallelism (ERGOTORUS_THREADS fallback)")
    parser.add_argument("--check", action="store_true",
                        help="enforce acceptance thresholds (exit 4 on failure)")
    parser.add_argument("--out-dir", help="override the report directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_path = args.config or args.config_pos
    command = args.command or args.command_pos
    if not config_path or not command:
        print("error: need a config path and a command", file=sys.stderr)
        return 2
    if command not in COMMANDS:
        print(f"error: unknown command {command!r}; "
              f"choose from {', '.join(sorted(COMMANDS))}", file=sys.stderr)
        return 2
    try:
        raw = Path(config_path).read_bytes()
        cfg = load_config(config_path)
    except FileNotFoundError:
        print(f"error: config not found: {config_path}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = Path(args.out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        threads = _resolve_threads(args.threads)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    ctx = RunContext(out_dir=out_dir, seed=cfg.seed, threads=threads,
                     check=args.check,
                     config_sha256=hashlib.sha256(raw).hexdigest(),
                     artifacts=[], failures=[])
    try:
        payload = COMMANDS[command](cfg, ctx)
    except DegenerateVarianceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    summary = {
        "command": command,
        "version": __version__,
        "seed": ctx.seed,
        "config_sha256": ctx.config_sha256,
        "artifacts": sorted(ctx.artifacts),
        "report": payload,
    }
    name = f"{command.replace('-', '_')}_summary.json"
    _write_json(ctx, name, summary)
    print(f"{command}: wrote {ctx.out_dir / name}")
    if ctx.failures:
        for failure in ctx.failures:
            print(f"check failed: {failure}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
