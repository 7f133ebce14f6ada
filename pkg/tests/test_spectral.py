"""Fourier profiles, smoothing kernels, and the test-function dictionary."""

import numpy as np
import pytest

from ergotorus.spectral import (
    default_dictionary,
    empirical_fourier,
    fourier_decay_profile,
    frequency_box,
    jackson_kernel,
    psi_rate,
    smooth_approx,
    sobolev_norm_sq,
    walk_profile_peaks,
    wasserstein_lower_bound,
)
from ergotorus.diophantine import PhiSpec
from ergotorus.torus import (
    CallbackFunction,
    Frequency,
    MetricKind,
    TrigPolynomial,
    unit_grid,
)
from ergotorus.walk import AtomicDistribution


def _dirac(coords):
    return AtomicDistribution(
        points=np.asarray([coords], dtype=np.float64),
        weight_num=(1,),
        weight_den=1,
        generation=0,
    )


def test_empirical_fourier_point_mass():
    # for a Dirac at x the coefficient is exp(-2 pi i a.x)
    dist = _dirac((0.25, 0.0))
    val = empirical_fourier(dist, Frequency((1, 0)))
    assert val == pytest.approx(np.exp(-2j * np.pi * 0.25), abs=1e-14)
    assert empirical_fourier(dist, Frequency((0, 0))) == pytest.approx(1.0)


def test_empirical_fourier_uniform_pair_cancels():
    dist = AtomicDistribution(
        points=np.asarray([[0.0, 0.0], [0.5, 0.0]]),
        weight_num=(1, 1),
        weight_den=2,
        generation=0,
    )
    # (1 + e^{-i pi}) / 2 = 0 at frequency (1, 0)
    assert abs(empirical_fourier(dist, Frequency((1, 0)))) < 1e-15
    assert empirical_fourier(dist, Frequency((2, 0))) == pytest.approx(1.0)


def test_frequency_box_size_and_order():
    box = frequency_box(2, 2)
    assert len(box) == 25  # the full box, zero included
    assert Frequency((0, 0)) in box
    assert Frequency((2, -2)) in box
    assert all(a.norm_inf() <= 2 for a in box)


def test_jackson_kernel_m1_closed_form():
    k = jackson_kernel(1)
    got = {idx: v for idx, v in k.coeffs}
    assert got[0] == pytest.approx(1.0)
    assert got[1] == got[-1] == pytest.approx(2.0 / 3.0)
    assert got[2] == got[-2] == pytest.approx(1.0 / 6.0)


def test_jackson_kernel_properties():
    for m in (2, 5, 8):
        k = jackson_kernel(m)
        # unit mass, even symmetry, support [-4m+2, 4m-2]
        assert k.factor(0) == pytest.approx(1.0)
        assert k.coeffs[0][0] == -4 * m + 2
        assert k.coeffs[-1][0] == 4 * m - 2
        for idx, v in k.coeffs:
            assert v == pytest.approx(k.factor(-idx), abs=1e-15)
            assert 0.0 <= v <= 1.0
        # the kernel is a square, hence pointwise nonnegative
        ys = np.linspace(0.0, 1.0, 511)
        assert k.evaluate(ys).min() > -1e-12
        ks = np.arange(-4 * m - 3, 4 * m + 4)
        assert np.allclose(k.factor_array(ks), [k.factor(int(i)) for i in ks])


def test_smooth_approx_reproduces_low_frequencies():
    # smoothing rescales coefficient a by factor(a); with m = 16 the
    # frequency (1, 0) factor is within 0.2% of one
    f = TrigPolynomial.cosine((1, 0))
    fm = smooth_approx(f, 16)
    grid = unit_grid(64, 2)
    assert np.max(np.abs(f.evaluate(grid) - fm.evaluate(grid))) < 1e-2
    assert fm.mean == pytest.approx(f.mean, abs=1e-12)


def test_smooth_approx_mean_preserved_for_callables():
    f = CallbackFunction(lambda p: np.minimum(p[:, 0], 1.0 - p[:, 0]), 1, gamma=1.0)
    fm = smooth_approx(f, 8, grid_n=1024)
    grid = unit_grid(1024, 1)
    assert fm.mean == pytest.approx(float(np.mean(f.evaluate(grid))), abs=1e-12)


def test_smooth_approx_error_shrinks_with_m():
    f = CallbackFunction(
        lambda p: np.minimum(p[:, 0] % 1.0, 1.0 - p[:, 0] % 1.0), 1, gamma=1.0
    )
    grid = unit_grid(2048, 1)
    target = f.evaluate(grid)
    errs = []
    for m in (4, 8, 16, 32):
        fm = smooth_approx(f, m, grid_n=max(16 * m, 1024))
        errs.append(float(np.max(np.abs(fm.evaluate(grid) - target))))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # roughly linear decay in m for a Lipschitz target
    assert errs[-1] < errs[0] / 4.0


def test_sobolev_norm_single_mode():
    f = TrigPolynomial.cosine((1, 0))
    # two modes of weight 1/2 each at ||a||_2 = 1: 2 * (1/4) * 2^(2r)
    assert sobolev_norm_sq(f, r=2.0) == pytest.approx(8.0, abs=1e-12)


def test_walk_profile_exact_matches_montecarlo(rho_expanding):
    x = (0.2, 0.9)
    exact = walk_profile_peaks(rho_expanding, x, [4], a_max=2, exact_until=10)
    mc = walk_profile_peaks(
        rho_expanding, x, [4], a_max=2, exact_until=0, trials=200000, seed=31
    )
    pe, pm = exact[4], mc[4]
    assert pe.normalizer.startswith("exact")
    assert pm.normalizer.startswith("monte-carlo")
    ent_m = dict(pm.entries)
    for a, coeff in pe.entries:
        assert abs(coeff - ent_m[a]) < 0.01


def test_walk_profile_peak_decays(rho_expanding):
    profs = walk_profile_peaks(
        rho_expanding, (np.sqrt(2) - 1, np.sqrt(3) - 1), [2, 8, 14], a_max=3,
        exact_until=20,
    )
    peaks = [profs[n].peak_modulus for n in (2, 8, 14)]
    assert peaks[2] < peaks[0]
    assert peaks[2] < 0.05


def test_fourier_decay_profile_point_mass():
    dist = _dirac((0.0, 0.0))
    prof, mass = fourier_decay_profile(dist, a_max=2)
    # every character of a lattice Dirac has modulus one
    assert prof.peak_modulus == pytest.approx(1.0)
    assert mass == pytest.approx(1.0)


def test_dictionary_size_and_certified_norms():
    d = default_dictionary(2)
    assert len(d) == 112  # 80 box characters + 32 distance bumps
    for f in d:
        bound = f.holder_upper_bound(MetricKind.SUP)
        assert bound is not None
        assert bound <= 1.0 + 1e-9


def test_wasserstein_lower_bound_shifted_dirac():
    d0 = _dirac((0.0, 0.0))
    d1 = _dirac((0.25, 0.0))
    dictionary = default_dictionary(2, gamma=1.0)
    val = wasserstein_lower_bound(d0, d1, 1.0, dictionary)
    # a certified lower bound can never exceed the true transport cost,
    # which is the sup-distance 1/4 between the two atoms
    assert 0.0 < val <= 0.25 + 1e-12
    # frozen value: the maximizing member is a seeded distance bump
    assert val == pytest.approx(1.0 / 6.0, abs=1e-12)
    assert wasserstein_lower_bound(d0, d0, 1.0, dictionary) == 0.0


def test_psi_rate_decreasing_in_t():
    phi = PhiSpec("power", 2.0)
    vals = [psi_rate(t, 1.0, 1.0, phi) for t in (2.0, 8.0, 32.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.0
