"""Law of large numbers, CLT normalization, and the iterated-log envelope."""

import math
from fractions import Fraction

import numpy as np
import pytest

from ergotorus.errors import DegenerateVarianceError, ValidationError
from ergotorus.limits import (
    clt_experiment,
    fourth_moment_scan,
    ks_distance_normal,
    lil_checkpoints,
    lil_envelope,
    lindeberg_check,
    lln_check,
    martingale_decompose,
)
from ergotorus.poisson import poisson_solve
from ergotorus.torus import TorusPoint, TrigPolynomial
from ergotorus.walk import simulate_trajectory

F_COS = TrigPolynomial.cosine((1, 0))


def test_martingale_decomposition_telescopes(rho_expanding):
    sol = poisson_solve(rho_expanding, F_COS, n_terms=8)
    traj = simulate_trajectory(rho_expanding, (0.2, 0.9), 200, seed=6)
    parts = martingale_decompose(rho_expanding, sol, traj)
    # increments + boundary telescope to sum (g - Pg)(X_k), which is the
    # centered sum minus the truncation residual
    fc = sol.f_centered.evaluate(traj.points[:-1]).real
    resid = sol.residual_poly.evaluate(traj.points[:-1]).real
    total = float(np.sum(parts.increments)) + parts.boundary
    assert total == pytest.approx(float(np.sum(fc - resid)), abs=1e-9)
    assert len(parts.increments) == 200


def test_martingale_increments_vanish_for_coboundary():
    from ergotorus.degeneracy import degenerate_example

    rho, g, _f = degenerate_example()
    traj = simulate_trajectory(rho, (0.3, 0.4), 300, seed=11)
    parts = martingale_decompose(rho, g, traj)
    # Pg(x) = g(Ax) = g(BAx): the martingale part of g - Pg is zero
    assert np.max(np.abs(parts.increments)) < 1e-12


def test_lln_at_fixed_point(rho_expanding):
    res = lln_check(rho_expanding, F_COS, (0.0, 0.0), 50, trials=20, seed=1)
    # the walk never leaves 0, where cos = 1; Lebesgue target is 0
    assert res.birkhoff_mean == pytest.approx(1.0)
    assert res.target == 0.0
    assert res.gap == pytest.approx(1.0)


def test_lln_constant_function_is_exact(rho_expanding):
    f = TrigPolynomial.constant(0.5, 2)
    res = lln_check(rho_expanding, f, (0.2, 0.9), 50, trials=10, seed=3)
    assert res.birkhoff_mean == 0.5
    assert res.gap == 0.0


def test_lln_rational_orbit_target(rho_expanding):
    # start (1/2, 1/2): the orbit is three states and the stationary
    # average of cos(2 pi x_1) over it is -1/3, not the Lebesgue value 0
    x = TorusPoint.from_fractions((Fraction(1, 2), Fraction(1, 2)))
    res = lln_check(rho_expanding, F_COS, x, 3000, trials=200, seed=9)
    assert res.target == pytest.approx(-1.0 / 3.0, abs=1e-12)
    assert abs(res.gap) < 0.02


def test_lln_generic_start_hits_lebesgue(rho_expanding):
    res = lln_check(
        rho_expanding, F_COS, (np.sqrt(2) - 1, np.sqrt(3) - 1), 5000,
        trials=100, seed=14,
    )
    assert res.target == 0.0
    assert abs(res.gap) < 0.02
    assert res.stderr < 0.02


def test_ks_distance_hand_value():
    # two samples at -1 and 1 against N(0,1): the empirical cdf jumps to
    # 1/2 at -1 where Phi = 0.1587, so the gap is Phi(1) - 1/2 = 0.3413
    ks = ks_distance_normal(np.array([-1.0, 1.0]), 1.0)
    expected = 0.5 * math.erf(1.0 / math.sqrt(2.0))
    assert ks == pytest.approx(expected, abs=1e-12)


def test_clt_normalized_samples_standardize(rho_expanding):
    rep = clt_experiment(
        rho_expanding, F_COS, (0.2, 0.9), 400, trials=400, sigma2_ref=0.5,
        seed=21,
    )
    samples = np.asarray(rep.normalized_samples)
    assert samples.shape == (400,)
    assert abs(rep.mean_hat) < 0.15
    # samples are S_n / sqrt(n); var_hat estimates sigma^2 itself and the
    # reference variance only enters through the KS comparison
    assert abs(rep.var_hat - 0.5) < 0.15
    assert np.var(samples, ddof=1) == pytest.approx(rep.var_hat, rel=1e-12)
    assert rep.ks_stat < 0.1
    assert rep.ks_stat_fitted < 0.1


def test_clt_sign_symmetry(rho_expanding):
    # replacing f by -f flips every sample, so both KS statistics agree
    neg = TrigPolynomial.cosine((1, 0)).scaled(-1.0)
    rep_pos = clt_experiment(
        rho_expanding, F_COS, (0.2, 0.9), 200, trials=150, sigma2_ref=0.5,
        seed=33,
    )
    rep_neg = clt_experiment(
        rho_expanding, neg, (0.2, 0.9), 200, trials=150, sigma2_ref=0.5,
        seed=33,
    )
    assert np.allclose(
        np.asarray(rep_pos.normalized_samples),
        -np.asarray(rep_neg.normalized_samples),
    )
    assert rep_pos.ks_stat == pytest.approx(rep_neg.ks_stat, abs=1e-12)


def test_clt_validation():
    from conftest import A, C
    from ergotorus.torus import GeneratorMeasure

    rho = GeneratorMeasure.uniform([A, C])
    with pytest.raises(ValidationError):
        clt_experiment(rho, F_COS, (0.1, 0.2), 100, trials=50, sigma2_ref=0.5, seed=1)
    with pytest.raises(ValidationError):
        clt_experiment(rho, F_COS, (0.1, 0.2), 100, trials=100, sigma2_ref=-1.0, seed=1)


def test_clt_zero_variance_reference(rho_expanding):
    # f = 0 gives a point mass at zero; with sigma2_ref = 0 the report
    # must show all mass inside the small-window check, not a KS fit
    f = TrigPolynomial.constant(0.0, 2)
    rep = clt_experiment(
        rho_expanding, f, (0.2, 0.9), 100, trials=100, sigma2_ref=0.0, seed=2,
    )
    assert np.all(np.abs(np.asarray(rep.normalized_samples)) <= 0.05)


def test_clt_threads_bit_identical(rho_expanding):
    rep1 = clt_experiment(
        rho_expanding, F_COS, (0.2, 0.9), 300, trials=120, sigma2_ref=0.5,
        seed=8, threads=1,
    )
    rep4 = clt_experiment(
        rho_expanding, F_COS, (0.2, 0.9), 300, trials=120, sigma2_ref=0.5,
        seed=8, threads=4,
    )
    assert rep1.normalized_samples == rep4.normalized_samples
    assert rep1.ks_stat == rep4.ks_stat


def test_lil_checkpoints_geometric():
    cps = lil_checkpoints(1000)
    assert cps[0] == 100
    assert cps[-1] == 1000
    assert list(cps) == sorted(set(cps))
    # ratio steps: ceil(100 * 1.5^j)
    assert cps[1] == 150
    assert cps[2] == 225
    assert cps[3] == 338


def test_lil_envelope_shape_and_range(rho_expanding):
    rep = lil_envelope(
        rho_expanding, F_COS, (0.2, 0.9), 2000, trials=24, sigma2_ref=0.5,
        seed=17,
    )
    cps = lil_checkpoints(2000)
    assert rep.values.shape == (24, len(cps))
    assert rep.checkpoints == cps
    assert rep.final_max == np.max(rep.values[:, -1])
    assert rep.envelope_max >= rep.final_max
    assert np.isfinite(rep.values).all()


def test_lil_envelope_threads_bit_identical(rho_expanding):
    kw = dict(n_max=1500, trials=16, sigma2_ref=0.5, seed=19)
    r1 = lil_envelope(rho_expanding, F_COS, (0.2, 0.9), threads=1, **kw)
    r2 = lil_envelope(rho_expanding, F_COS, (0.2, 0.9), threads=3, **kw)
    assert np.array_equal(r1.values, r2.values)


def test_lil_degenerate_variance_raises(rho_expanding):
    with pytest.raises(DegenerateVarianceError) as info:
        lil_envelope(
            rho_expanding, F_COS, (0.2, 0.9), 1000, trials=8, sigma2_ref=0.0,
            seed=3,
        )
    assert "bounded_sum_verify" in info.value.suggestion


def test_lindeberg_truncated_mass_shrinks(rho_expanding):
    sol = poisson_solve(rho_expanding, F_COS, n_terms=8)
    g_sup = float(sum(abs(c) for _, c in sol.g.coeffs))
    rep = lindeberg_check(
        rho_expanding, sol, (0.2, 0.9), eps=0.1, seed=23,
        n_values=(100, 400, 1600), trials=24, g_sup=g_sup,
    )
    assert rep.estimates[-1] <= rep.estimates[0] + 1e-12
    # bounded increments: beyond the cutoff the truncated mass is exactly 0
    assert rep.estimates[-1] == 0.0
    assert rep.cutoff >= 1


def test_lindeberg_smaller_eps_larger_mass(rho_expanding):
    sol = poisson_solve(rho_expanding, F_COS, n_terms=8)
    small = lindeberg_check(
        rho_expanding, sol, (0.2, 0.9), eps=0.01, seed=23, n_values=(50,),
        trials=16,
    )
    large = lindeberg_check(
        rho_expanding, sol, (0.2, 0.9), eps=1.0, seed=23, n_values=(50,),
        trials=16,
    )
    assert small.estimates[0] >= large.estimates[0]


def test_fourth_moment_scaling(rho_expanding):
    rows = fourth_moment_scan(
        rho_expanding, F_COS, (0.2, 0.9), [200, 800], trials=600, seed=41,
    )
    for row in rows:
        assert row.fourth_moment > 0.0
        assert row.second_moment > 0.0
        # ratio is normalized by the gaussian value 3, so the limit is 1
        assert 0.7 < row.kurtosis_ratio < 1.3


def test_fourth_moment_iid_control_matches_normal():
    from ergotorus.torus import GeneratorMeasure
    from conftest import A, C

    rho = GeneratorMeasure.uniform([A, C])
    rows = fourth_moment_scan(
        rho, F_COS, (0.2, 0.9), [400], trials=2000, seed=7, iid_control=True,
    )
    assert rows[0].kurtosis_ratio == pytest.approx(1.0, abs=0.2)
