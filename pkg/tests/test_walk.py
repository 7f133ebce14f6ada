"""Walk simulation, exact rational orbits, and character bookkeeping."""

from fractions import Fraction

import numpy as np
import pytest

from ergotorus.errors import BudgetExceededError, ValidationError
from ergotorus.torus import Frequency, TorusPoint
from ergotorus.walk import (
    character_propagate,
    ensemble_birkhoff,
    ensemble_final_points,
    rational_orbit,
    simulate_trajectory,
    transfer_apply,
    transfer_power_apply,
    word_distribution_exact,
)

from conftest import A, BA, C


def test_simulate_trajectory_reproducible(rho_expanding):
    t1 = simulate_trajectory(rho_expanding, (0.2, 0.9), 500, seed=42, trial=3)
    t2 = simulate_trajectory(rho_expanding, (0.2, 0.9), 500, seed=42, trial=3)
    assert np.array_equal(t1.points, t2.points)
    assert np.array_equal(t1.word, t2.word)
    assert t1.points.shape == (501, 2)
    assert t1.word.shape == (500,)
    assert np.all((t1.points >= 0.0) & (t1.points < 1.0))


def test_simulate_trajectory_steps_match_word(rho_expanding):
    # replaying the recorded word by hand must reproduce every point
    t = simulate_trajectory(rho_expanding, (0.2, 0.9), 50, seed=7)
    mats = [m.array.astype(float) for m in rho_expanding.matrices]
    x = np.array([0.2, 0.9])
    for k in range(50):
        x = (mats[t.word[k]] @ x) % 1.0
        assert np.allclose(x, t.points[k + 1], atol=1e-12)


def test_rational_start_keeps_exact_coordinates(rho_expanding):
    x = TorusPoint.from_fractions((Fraction(1, 3), Fraction(2, 7)))
    t = simulate_trajectory(rho_expanding, x, 40, seed=1)
    assert t.exact_points is not None
    # denominators never grow: the action is integer-linear mod 1
    for pt in t.exact_points:
        assert all(c.denominator in (1, 3, 7, 21) for c in pt)
    last = t.exact_points[-1]
    assert np.allclose([float(c) for c in last], t.points[-1], atol=1e-15)


def test_rational_orbit_half_half(rho_expanding):
    x = TorusPoint.from_fractions((Fraction(1, 2), Fraction(1, 2)))
    orbit = rational_orbit(rho_expanding, x)
    got = {tuple(s.exact) for s in orbit.states}
    expected = {
        (Fraction(1, 2), Fraction(1, 2)),
        (Fraction(1, 2), Fraction(0)),
        (Fraction(0), Fraction(1, 2)),
    }
    assert got == expected
    # doubly stochastic transition: rows and columns each sum to 1
    rows = [sum(row) for row in orbit.transition]
    cols = [sum(col) for col in zip(*orbit.transition)]
    assert all(r == 1 for r in rows)
    assert all(c == 1 for c in cols)


def test_rational_orbit_uniform_mean_oracle(rho_expanding):
    # mean of cos(2 pi x_1) over {(1/2,1/2),(1/2,0),(0,1/2)} is (-1-1+1)/3
    x = TorusPoint.from_fractions((Fraction(1, 2), Fraction(1, 2)))
    orbit = rational_orbit(rho_expanding, x)
    val = orbit.uniform_mean(lambda p: np.cos(2 * np.pi * p[:, 0]))
    assert val == pytest.approx(-1.0 / 3.0, abs=1e-15)


def test_rational_orbit_rejects_float_point(rho_expanding):
    with pytest.raises(ValidationError):
        rational_orbit(rho_expanding, (0.5, 0.25))


def test_word_distribution_exact_small_oracle(rho_degenerate):
    # start (1/2, 1/2); one step under A gives (1/2, 0), under BA gives (0, 1/2)
    x = TorusPoint.from_fractions((Fraction(1, 2), Fraction(1, 2)))
    dist = word_distribution_exact(rho_degenerate, x, 1)
    assert dist.size == 2
    assert dist.weight_den == 2
    pts = {tuple(np.round(p, 12)) for p in dist.points}
    assert pts == {(0.5, 0.0), (0.0, 0.5)}
    # expectation of x -> x_1 is (1/2 + 0)/2
    assert dist.expectation(lambda p: p[:, 0]) == pytest.approx(0.25)


def test_word_distribution_merges_coincident_images(rho_degenerate):
    # start at zero: every word maps it to zero, so 2^n branches collapse
    x = TorusPoint.from_fractions((Fraction(0), Fraction(0)))
    dist = word_distribution_exact(rho_degenerate, x, 6)
    assert dist.size == 1
    assert dist.weight_num == (1,)
    assert dist.weight_den == 1


def test_word_distribution_budget(rho_expanding):
    with pytest.raises(BudgetExceededError):
        word_distribution_exact(rho_expanding, (0.1, 0.2), 8, max_atoms=100)


def test_transfer_power_matches_distribution(rho_expanding):
    f = lambda p: np.cos(2 * np.pi * (p[:, 0] + p[:, 1]))
    x = (0.15, 0.4)
    dist = word_distribution_exact(rho_expanding, x, 3)
    via_dist = dist.expectation(f)
    via_transfer = transfer_power_apply(rho_expanding, f, x, 3)
    assert via_dist == pytest.approx(via_transfer, abs=1e-14)
    one = transfer_apply(rho_expanding, f, x)
    assert one == pytest.approx(transfer_power_apply(rho_expanding, f, x, 1), abs=1e-15)


def test_character_propagate_one_step(rho_expanding):
    # frequencies move by the transpose: a=(1,0) -> A^T a=(2,1), C^T a=(1,1)
    dist = character_propagate(rho_expanding, Frequency((1, 0)), 1)
    d = dist.as_dict()
    assert d[Frequency((2, 1))] == Fraction(1, 2)
    assert d[Frequency((1, 1))] == Fraction(1, 2)


def test_character_propagate_weights_exact(rho_degenerate):
    dist = character_propagate(rho_degenerate, Frequency((1, 0)), 4)
    total = sum(w for _, w in dist.weights)
    assert total == 1
    assert all(w.denominator <= 16 for _, w in dist.weights)
    assert dist.generation == 4


def test_ensemble_final_points_matches_trajectories(rho_expanding):
    finals = ensemble_final_points(rho_expanding, (0.2, 0.9), 64, seed=13, trials=5)
    for t in range(5):
        traj = simulate_trajectory(rho_expanding, (0.2, 0.9), 64, seed=13, trial=t)
        assert np.array_equal(finals[t], traj.points[-1])


def test_ensemble_birkhoff_block_size_is_invisible(rho_expanding):
    f = lambda p: np.sin(2 * np.pi * p[:, 0])
    sums_a, snaps_a, fin_a = ensemble_birkhoff(
        rho_expanding, (0.3, 0.1), 300, seed=9, trials=8, func=f,
        checkpoints=[10, 100, 300], block=7,
    )
    sums_b, snaps_b, fin_b = ensemble_birkhoff(
        rho_expanding, (0.3, 0.1), 300, seed=9, trials=8, func=f,
        checkpoints=[10, 100, 300], block=4096,
    )
    # states are elementwise so finals are bit-identical; the running sums
    # regroup across block boundaries and may differ by a few ulps
    assert np.array_equal(fin_a, fin_b)
    np.testing.assert_allclose(sums_a, sums_b, rtol=0, atol=1e-10)
    for n in (10, 100, 300):
        np.testing.assert_allclose(snaps_a[n], snaps_b[n], rtol=0, atol=1e-10)


def test_ensemble_birkhoff_trial_offset_slices_ensemble(rho_expanding):
    f = lambda p: p[:, 0]
    sums_all, _, _ = ensemble_birkhoff(
        rho_expanding, (0.3, 0.1), 100, seed=9, trials=8, func=f,
    )
    sums_tail, _, _ = ensemble_birkhoff(
        rho_expanding, (0.3, 0.1), 100, seed=9, trials=3, func=f, trial0=5,
    )
    assert np.array_equal(sums_all[5:], sums_tail)


def test_fixed_point_zero_is_absorbing(rho_expanding):
    t = simulate_trajectory(rho_expanding, (0.0, 0.0), 30, seed=3)
    assert np.all(t.points == 0.0)


def test_degenerate_pair_trace(rho_degenerate):
    # BA = B @ A with B the rotation by pi/2; sanity-check the fixture
    assert BA.entries == ((1, 1), (-2, -1))
    assert {m.entries for m in rho_degenerate.matrices} == {A.entries, BA.entries}
    assert (A @ C.inverse()).entries == ((3, -1), (1, 0))
