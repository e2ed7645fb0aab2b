# -*- coding: utf-8 -*-
"""
Tests for weakcalc: weak divergence, weak Hessian and distributional Jacobian pairings
"""

import numpy as np
import pytest

from fields import (
    DiagonalField, MatrixField, PolynomialBump, QuadraticFn, RadialConvexFn, SmoothedCone, constant_field,
    construct_bump, cofactor_field, diagonal_matrix_field, periodic_matrix_field, random_periodic_field,
    sobolev_range,
)
from quadrature import Domain, IntegrationScheme, integrate_ball, unit_ball_volume
from weakcalc import (
    GradientMap, TestFunction, bump_corpus, distributional_jacobian, fd_divergence,
    linear_map, make_test_function, max_divergence_residual, normalized_divergence_residual,
    weak_divergence_residual, weak_hessian_residual,
)

SCHEME = IntegrationScheme(dyadic_depth=20, nodes_per_annulus=12, angular_order=24, grid_resolution=32)
FAST = IntegrationScheme(dyadic_depth=20, nodes_per_annulus=12, angular_order=8, grid_resolution=32)


def outer_field(n):
    return MatrixField(n=n, evaluate=lambda x: x[:, :, None] * x[:, None, :],
                       domain=Domain.ball(np.zeros(n), 2.0), name="xx")


def eta_integral(g, eta):
    """integral of g * eta over the support of eta, g of shape (m, k)"""
    return integrate_ball(lambda x: g(x) * eta.value(x)[:, None], eta.n, SCHEME,
                          center=eta.center, radius=eta.radius).total


# ===== test functions =====

def test_test_function_needs_c2():
    with pytest.raises(ValueError):
        make_test_function([0.0, 0.0], 0.5, power=2)
    eta = make_test_function([0.0, 0.0], 0.5)
    assert isinstance(eta, TestFunction)
    assert eta.power == 8
    assert eta.value(np.array([[0.0, 0.0]]))[0] == 1.0
    assert eta.value(np.array([[0.6, 0.0]]))[0] == 0.0


def test_bump_corpus_is_reproducible_and_contained():
    first = bump_corpus(np.random.default_rng(5), [0.1, 0.2, 0.0], 0.8, count=12)
    second = bump_corpus(np.random.default_rng(5), [0.1, 0.2, 0.0], 0.8, count=12)
    assert len(first) == 12
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.center, b.center)
        assert (a.radius, a.amplitude) == (b.radius, b.amplitude)
        assert np.linalg.norm(a.center - np.array([0.1, 0.2, 0.0])) + a.radius <= 0.8 + 1e-12


# ===== weak divergence =====

def test_constant_field_has_zero_residual():
    M = np.array([[2.0, 0.5], [0.5, 1.0]])
    field_ = constant_field(M, Domain.ball([0.0, 0.0], 2.0))
    eta = make_test_function([0.3, -0.2], 0.4)
    assert np.max(np.abs(weak_divergence_residual(field_, eta, SCHEME))) <= 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_outer_product_field_residual(n):
    # div(x x^T) = (n + 1) x, so r_i = -(n + 1) integral x_i eta
    eta = make_test_function(np.linspace(0.1, 0.3, n), 0.5)
    r = weak_divergence_residual(outer_field(n), eta, SCHEME)
    expected = -(n + 1) * eta_integral(lambda x: x, eta)
    np.testing.assert_allclose(r, expected, rtol=1e-10, atol=1e-14)


def test_cofactor_of_bump_is_weakly_divergence_free():
    bump = construct_bump(2.0, 2, 1.0, 0.1, 0.5, np.array([0.1, -0.2]), FAST)
    field_ = cofactor_field(bump, Domain.ball(bump.x0, 1.0))
    corpus = bump_corpus(np.random.default_rng(0), bump.x0, bump.beta, count=5)
    assert max_divergence_residual(field_, corpus, SCHEME, workers=2) <= 1e-5


def test_cofactor_of_f_alpha_is_weakly_divergence_free():
    field_ = cofactor_field(RadialConvexFn(0.5, 3), Domain.ball(np.zeros(3), 2.0))
    eta = make_test_function([0.1, -0.1, 0.2], 0.5)
    assert normalized_divergence_residual(field_, eta, SCHEME) <= 1e-5


def test_bump_residual_shrinks_under_refinement():
    scheme = IntegrationScheme()
    bump = construct_bump(2.0, 3, 1.0, 0.1, 0.1, np.zeros(3), scheme)
    field_ = cofactor_field(bump, Domain.ball(bump.x0, bump.beta))
    corpus = bump_corpus(np.random.default_rng(0), bump.x0, 0.5 * bump.beta, count=10)
    coarse = max_divergence_residual(field_, corpus, scheme, workers=2)
    fine = max_divergence_residual(field_, corpus, scheme.refined(), workers=2)
    assert coarse <= 1e-5
    assert fine <= coarse or fine <= 1e-10


def test_cofactor_of_smoothed_cone_is_weakly_divergence_free():
    field_ = cofactor_field(SmoothedCone(0.1, 3), Domain.ball(np.zeros(3), 1.0))
    corpus = bump_corpus(np.random.default_rng(4), np.zeros(3), 0.5, count=6)
    assert max_divergence_residual(field_, corpus, SCHEME, workers=2) <= 1e-5


@pytest.mark.parametrize("n", [2, 3])
def test_periodic_field_is_weakly_divergence_free(n):
    rng = np.random.default_rng(40 + n)
    field_ = periodic_matrix_field(random_periodic_field(n, rng, laminates=1 if n == 3 else 0))
    corpus = bump_corpus(rng, np.full(n, 0.5), 0.5, count=6)
    assert max_divergence_residual(field_, corpus, SCHEME, workers=2) <= 1e-5


def test_diagonal_field_is_not_divergence_free():
    shared = PolynomialBump(np.zeros(2), 1.0, 4)
    field_ = diagonal_matrix_field(DiagonalField([shared, shared]))
    eta = make_test_function([0.3, 0.2], 0.5)
    assert normalized_divergence_residual(field_, eta, SCHEME) > 1e-3


# ===== weak Hessian =====

def test_weak_hessian_of_quadratic():
    f = QuadraticFn(np.array([[2.0, 0.3], [0.3, 1.0]]))
    eta = make_test_function([0.2, -0.4], 0.7)
    for i in range(2):
        for j in range(2):
            assert weak_hessian_residual(f, eta, i, j, SCHEME) <= 1e-9


def test_weak_hessian_of_cone():
    f = RadialConvexFn(0.0, 2)
    eta = make_test_function([0.1, 0.05], 0.4)
    for i in range(2):
        for j in range(2):
            assert weak_hessian_residual(f, eta, i, j, SCHEME) <= 1e-4


def test_weak_hessian_of_f_alpha_off_diagonal():
    f = RadialConvexFn(0.5, 3)
    eta = make_test_function([0.1, -0.1, 0.2], 0.5)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert weak_hessian_residual(f, eta, i, j, SCHEME) <= 1e-4


def test_weak_hessian_index_range():
    eta = make_test_function([0.0, 0.0], 0.5)
    with pytest.raises(ValueError):
        weak_hessian_residual(QuadraticFn(np.eye(2)), eta, 0, 2, SCHEME)


# ===== distributional Jacobian =====

@pytest.mark.parametrize("n", [2, 3])
def test_jacobian_of_linear_maps(n):
    eta = make_test_function(np.full(n, 0.1), 0.6, amplitude=1.5)
    mass = float(eta_integral(lambda x: np.ones((len(x), 1)), eta)[0])
    assert distributional_jacobian(linear_map(1.0, n), eta, SCHEME) == pytest.approx(mass, rel=1e-10)
    assert distributional_jacobian(linear_map(2.0, n), eta, SCHEME) == pytest.approx(2 ** n * mass, rel=1e-10)


def test_jacobian_of_f_alpha_is_absolutely_continuous():
    fn = RadialConvexFn(0.5, 2)
    eta = make_test_function([0.0, 0.0], 0.6)
    jac = distributional_jacobian(GradientMap(fn), eta, SCHEME)
    density = integrate_ball(lambda x: fn.det_hessian(x) * eta.value(x), 2, SCHEME,
                             radius=0.6, breaks=fn.break_radii).total
    assert jac == pytest.approx(float(density), rel=1e-6)


@pytest.mark.parametrize("n", [2, 3])
def test_jacobian_of_cone_is_an_atom(n):
    cone = GradientMap(RadialConvexFn(0.0, n))
    centered = make_test_function(np.zeros(n), 0.5)
    assert distributional_jacobian(cone, centered, SCHEME) == pytest.approx(unit_ball_volume(n), rel=0.05)

    shifted = make_test_function(np.r_[0.1, np.zeros(n - 1)], 0.5)
    eta0 = float(shifted.value(np.zeros((1, n)))[0])
    assert distributional_jacobian(cone, shifted, SCHEME) == pytest.approx(unit_ball_volume(n) * eta0, rel=0.05)


# ===== finite differences =====

def test_fd_divergence_of_outer_product():
    x = np.array([0.3, -0.2, 0.5])
    np.testing.assert_allclose(fd_divergence(outer_field(3), x), 4.0 * x, atol=1e-8)


def test_fd_divergence_of_cofactor_field_vanishes():
    field_ = cofactor_field(RadialConvexFn(0.5, 2), Domain.ball([0.0, 0.0], 2.0))
    assert np.max(np.abs(fd_divergence(field_, [0.5, 0.1]))) <= 1e-6
    with pytest.raises(ValueError):
        fd_divergence(field_, [0.5, 0.1], h=0.0)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.6, 0.9])
def test_weak_hessian_in_sobolev_range(alpha):
    p, n = 2.5, 2
    if not sobolev_range(alpha, p, n):
        pytest.skip("f_alpha outside W^{2,p}")
    f = RadialConvexFn(alpha, n)
    eta = make_test_function([0.05, -0.1], 0.45)
    for i, j in [(0, 0), (0, 1), (1, 1)]:
        assert weak_hessian_residual(f, eta, i, j, SCHEME) <= 1e-4
