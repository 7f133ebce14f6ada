"""Time the hot kernels on both backends and print a comparison table.

Usage: python3 benchmarks/bench_kernels.py [--trials 4096] [--nsteps 512]

The walk kernel is checked bit for bit across backends before timing;
u_delta_sum is checked to 1e-12 relative (summation order may differ).
"""

import argparse
import time

import numpy as np

from ergotorus.kernels import BACKEND, _walk_py

try:
    from ergotorus.kernels import _walk_cy
except ImportError:
    _walk_cy = None

MATS = np.array([[[2.0, 1.0], [1.0, 1.0]],
                 [[1.0, 1.0], [1.0, 2.0]]])
CUM_W = np.array([0.5, 1.0])


def time_best(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_walk(mod, trials, nsteps):
    state = np.zeros((trials, 2))
    state[:, 0] = np.linspace(0.1, 0.9, trials)
    state[:, 1] = 0.377
    trial_ids = np.arange(trials, dtype=np.uint64)

    def run():
        s = state.copy()
        mod.walk_block(MATS, CUM_W, s, 1234, trial_ids, 0, nsteps)
        return s

    return time_best(run), run()


def bench_udelta(mod, n_points, n_centers):
    rng = np.random.default_rng(7)
    pts = rng.random((n_points, 2))
    centers = rng.random((n_centers, 2))
    factors = rng.random(n_centers) + 0.5

    def run():
        return mod.u_delta_sum(pts, centers, factors, 0.3, True)

    return time_best(run), run()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=4096)
    ap.add_argument("--nsteps", type=int, default=512)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--centers", type=int, default=600)
    args = ap.parse_args()

    print(f"selected backend at import: {BACKEND}")
    mods = [("python", _walk_py)]
    if _walk_cy is not None:
        mods.append(("cython", _walk_cy))
    else:
        print("compiled extension not built; timing python backend only")

    results = {}
    finals = {}
    for name, mod in mods:
        t_walk, final = bench_walk(mod, args.trials, args.nsteps)
        t_ud, vals = bench_udelta(mod, args.points, args.centers)
        results[name] = (t_walk, t_ud)
        finals[name] = (final, vals)

    if len(mods) == 2:
        assert np.array_equal(finals["python"][0], finals["cython"][0]), \
            "walk backends disagree"
        np.testing.assert_allclose(finals["python"][1], finals["cython"][1],
                                   rtol=1e-12, atol=0.0)
        print("agreement: walk bitwise OK, u_delta_sum within 1e-12 relative")

    steps = args.trials * args.nsteps
    pairs = args.points * args.centers
    print(f"\n{'kernel':<14} {'backend':<8} {'time':>10} {'rate':>16}")
    for name, (t_walk, t_ud) in results.items():
        print(f"{'walk_block':<14} {name:<8} {t_walk * 1e3:>8.1f}ms "
              f"{steps / t_walk:>12.3g}/s")
        print(f"{'u_delta_sum':<14} {name:<8} {t_ud * 1e3:>8.1f}ms "
              f"{pairs / t_ud:>12.3g}/s")
    if len(mods) == 2:
        pw = results["python"][0] / results["cython"][0]
        pu = results["python"][1] / results["cython"][1]
        print(f"\nspeedup cython/python: walk_block {pw:.1f}x, "
              f"u_delta_sum {pu:.1f}x")


if __name__ == "__main__":
    main()
