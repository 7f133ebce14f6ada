"""Coset obstructions and the worked zero-variance example."""

import math

import numpy as np
import pytest

from ergotorus.degeneracy import (
    bounded_sum_verify,
    degenerate_example,
    find_coset_certificate,
    grid_l2_norm,
    invariance_check,
    product_set_closure,
)
from ergotorus.errors import ValidationError
from ergotorus.torus import (
    GeneratorMeasure,
    LatticeMatrix,
    TrigPolynomial,
    unit_grid,
    wrap_unit,
)

from conftest import A, B, BA, C


def test_closure_degenerate_is_rotation_group(rho_degenerate):
    # differences BA * A^-1 generate the order-4 rotation subgroup
    res = product_set_closure(rho_degenerate)
    assert res.complete
    assert res.size == 4
    ids = {m.entries for m in res.elements}
    expected = {
        LatticeMatrix.identity(2).entries,
        B.entries,
        (B @ B).entries,
        (B @ B @ B).entries,
    }
    assert ids == expected
    assert res.contains(B)


def test_closure_expanding_keeps_growing(rho_expanding):
    res = product_set_closure(rho_expanding, max_word_len=8)
    assert not res.complete
    # the cyclic group generated by A C^-1 is infinite; at word length 8
    # the breadth-first closure holds 17 distinct elements
    assert res.size == 17
    assert res.contains(A @ C.inverse())
    assert res.contains(LatticeMatrix.identity(2))


def test_closure_budget():
    rho = GeneratorMeasure.uniform([A, C])
    with pytest.raises(ValidationError):
        product_set_closure(rho, max_word_len=0)
    res = product_set_closure(rho, max_word_len=12, max_elems=10)
    assert not res.complete
    assert res.size <= 10


def test_invariance_distance_under_rotations(rho_degenerate):
    _rho, g, _f = degenerate_example()
    closure = product_set_closure(rho_degenerate)
    sample = np.random.default_rng(3).random((400, 2))
    # euclidean distance to 0 is invariant under the lattice rotation B
    assert invariance_check(closure, g, sample) < 1e-12


def test_invariance_detects_noninvariant_function(rho_degenerate):
    closure = product_set_closure(rho_degenerate)
    sample = np.random.default_rng(4).random((400, 2))
    f = TrigPolynomial.cosine((1, 0))
    # cos(2 pi x_1) is not rotation invariant
    assert invariance_check(closure, f, sample) > 0.5


def test_degenerate_example_transfer_collapses():
    rho, g, f = degenerate_example()
    pts = np.random.default_rng(9).random((1000, 2))
    a_mat = A.array.astype(np.float64)
    g_of_ax = g.evaluate(wrap_unit(pts @ a_mat.T))
    # Pg(x) = g(Ax) because the second atom is an isometry times A
    pg = np.zeros(len(pts))
    for mat, w in rho.atoms:
        pg += float(w) * g.evaluate(wrap_unit(pts @ mat.array.astype(np.float64).T))
    assert np.max(np.abs(pg - g_of_ax)) < 1e-12
    # so f = g - Pg equals g - g(A.) pointwise
    assert np.max(np.abs(f.evaluate(pts) - (g.evaluate(pts) - g_of_ax))) < 1e-12


def test_degenerate_example_observable_is_not_trivial():
    _rho, _g, f = degenerate_example()
    # the coboundary is identically small in sum but not the zero function
    norm = grid_l2_norm(f, grid_n=256)
    assert norm > 0.05


def test_bounded_sum_verify_degenerate():
    rho, g, _f = degenerate_example()
    for seed in range(5):
        partial_max, defect = bounded_sum_verify(rho, g, (0.3, 0.4), 2000, seed=seed)
        assert defect < 1e-9
        # partial sums are differences of two distances, so at most
        # 2 * sup g = sqrt(2) in the euclidean metric on the 2-torus
        assert partial_max <= math.sqrt(2.0) + 1e-12


def test_bounded_sum_control_grows(rho_expanding):
    # for a genuinely fluctuating observable the same partial sums leave
    # any fixed band: compare cos(2 pi x_1) sums against the sqrt(2) bound
    f = TrigPolynomial.cosine((1, 0))
    exceeded = 0
    for seed in range(10):
        partial_max, _defect = bounded_sum_verify(
            rho_expanding, f, (0.2, 0.9), 10000, seed=seed,
        )
        if partial_max > math.sqrt(2.0):
            exceeded += 1
    assert exceeded >= 9


def test_coset_certificate_exists_for_degenerate(rho_degenerate):
    cert = find_coset_certificate(rho_degenerate)
    assert cert is not None
    assert cert.closure_complete
    assert cert.closure_size == 4
    # gamma^-1 support lies inside the certified subgroup coset
    gamma_inv = cert.gamma.inverse()
    closure_ids = {m.entries for m in product_set_closure(rho_degenerate).elements}
    for mat in rho_degenerate.matrices:
        assert (mat @ gamma_inv).entries in closure_ids or (
            gamma_inv @ mat).entries in closure_ids
    d = cert.to_json_dict()
    assert d["closure_size"] == 4
    assert d["closure_complete"] is True


def test_coset_certificate_expanding_incomplete(rho_expanding):
    cert = find_coset_certificate(rho_expanding)
    # a certificate always exists; what fails is completeness of the
    # closure, which is the meaningful half of the degeneracy test
    assert cert is not None
    assert not cert.closure_complete


def test_grid_l2_norm_constant():
    f = TrigPolynomial.constant(0.75, 2)
    assert grid_l2_norm(f, grid_n=64) == pytest.approx(0.75, abs=1e-12)
