# -*- coding: utf-8 -*-
"""
Tests for fields: closed-form jets of every family against finite differences and hand values
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import ConvexityMarginViolated, InvalidExponent, OnSingularSet
from fields import (
    BumpField, DiagonalField, PeriodicField, PolynomialBump, QuadraticFn, RadialConvexFn,
    SmoothedCone, alpha_for_threshold, bump_eval, constant_field, construct_bump,
    cofactor_field, cofactor_integrable, critical_exponent, diagonal_eval, periodic_eval,
    radial_eval, random_periodic_field, smoothed_cone_eval, smoothed_cone_sup_gap, sobolev_range,
)
from matkit import cofactor, det, psd_check
from quadrature import Domain, IntegrationScheme
from weakcalc import fd_gradient, fd_hessian

FAST = IntegrationScheme(dyadic_depth=20, nodes_per_annulus=12, angular_order=8, grid_resolution=32)


def shell_points(rng, n, count, center=None, scale=1.0):
    center = np.zeros(n) if center is None else center
    dirs = rng.standard_normal((count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.where(rng.uniform(size=count) < 0.5,
                     rng.uniform(0.05, 0.95, size=count), rng.uniform(1.05, 2.0, size=count))
    return center + scale * radii[:, None] * dirs


def max_relative_error(approx, exact):
    scale = np.maximum(1.0, np.max(np.abs(exact), axis=(1, 2)))
    return float(np.max(np.max(np.abs(approx - exact), axis=(1, 2)) / scale))


@pytest.fixture(scope="module")
def bump():
    return construct_bump(2.0, 3, 1.0, 0.1, 0.1, np.array([0.2, -0.1, 0.3]), FAST)


# ===== exponents =====

def test_critical_exponent_values():
    assert critical_exponent(2.0, 3) == pytest.approx(0.25)
    assert critical_exponent(1.0, 2) == 0.0
    assert critical_exponent(3.0, 2) == pytest.approx(1.0 / 3.0)
    with pytest.raises(InvalidExponent):
        critical_exponent(0.5, 3)


def test_sobolev_and_cofactor_ranges():
    assert sobolev_range(0.0, 1.5, 2)
    assert not sobolev_range(0.0, 3.0, 2)
    assert sobolev_range(0.5, 3.0, 2)
    assert not sobolev_range(-0.1, 1.0, 2)
    # alpha > p* exactly when the cofactor is p-integrable
    for p, n in [(2.0, 3), (3.0, 2), (4.0, 4)]:
        p_star = critical_exponent(p, n)
        assert cofactor_integrable(p_star + 1e-6, p, n)
        assert not cofactor_integrable(p_star - 1e-6, p, n)


# ===== f_alpha =====

def test_alpha_one_is_quadratic():
    for n in (2, 3):
        jet = radial_eval(RadialConvexFn(1.0, n), np.array([0.3] + [0.1] * (n - 1)))
        np.testing.assert_allclose(jet.hessian, 2.0 * np.eye(n), atol=1e-14)
        assert jet.det_hessian == pytest.approx(2.0 ** n)


def test_f_alpha_hand_values():
    jet = radial_eval(RadialConvexFn(0.5, 2), np.array([0.25, 0.0]))
    assert jet.det_hessian == pytest.approx(4.5, rel=1e-12)
    outer = radial_eval(RadialConvexFn(0.3, 3), np.array([2.0, 0.0, 0.0]))
    np.testing.assert_allclose(outer.hessian, 1.3 * np.eye(3), rtol=1e-14)
    assert outer.det_hessian == pytest.approx(2.197, rel=1e-12)


def test_f_alpha_refuses_singular_set():
    fn = RadialConvexFn(0.5, 2)
    with pytest.raises(OnSingularSet):
        radial_eval(fn, np.zeros(2))
    with pytest.raises(OnSingularSet):
        radial_eval(fn, np.array([1.0, 0.0]))
    with pytest.raises(InvalidExponent):
        RadialConvexFn(-0.1, 2)


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.9])
def test_f_alpha_continuous_across_unit_sphere(alpha):
    fn = RadialConvexFn(alpha, 3)
    inner = fn.value(np.array([[1.0 - 1e-8, 0.0, 0.0]]))[0]
    outer = fn.value(np.array([[1.0 + 1e-8, 0.0, 0.0]]))[0]
    assert abs(inner - outer) <= 1e-6


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.9])
@pytest.mark.parametrize("n", [2, 3])
def test_f_alpha_derivatives_match_finite_differences(alpha, n):
    fn = RadialConvexFn(alpha, n)
    pts = shell_points(np.random.default_rng(17), n, 100)
    hess = fn.hessian(pts)

    grad_err = np.max(np.abs(fd_gradient(fn.value, pts) - fn.gradient(pts)))
    assert grad_err <= 1e-6
    assert max_relative_error(fd_hessian(fn.gradient, pts), hess) <= 1e-6

    d_matrix = det(hess)
    assert np.all(np.abs(fn.det_hessian(pts) - d_matrix) <= 1e-10 * np.maximum(1.0, np.abs(d_matrix)))
    assert np.all(psd_check(cofactor(hess)))


def test_jet_cofactor_determinant_identity():
    fn = RadialConvexFn(0.5, 3)
    jet = radial_eval(fn, np.array([0.2, 0.3, -0.1]))
    assert det(jet.cof_hessian) == pytest.approx(jet.det_hessian ** 2, rel=1e-9)


# ===== bump =====

def test_bump_alpha_from_exponents(bump):
    assert bump.alpha == pytest.approx(1.0 - 1.0 / (4.0 / 3.0 + 0.1), rel=1e-12)
    assert bump.alpha == pytest.approx(0.30233, abs=1e-5)
    assert bump.c > 0
    np.testing.assert_allclose(bump.S, 2.0 * bump.c * (1.0 + bump.alpha) * np.eye(3))


def test_unit_bump_reduces_to_f_alpha():
    alpha = 0.4
    unit = BumpField(p=2.0, n=2, beta=2.0, delta=1.0, eps=0.1, x0=np.zeros(2), alpha=alpha, c=1.0)
    pts = shell_points(np.random.default_rng(1), 2, 30)
    np.testing.assert_allclose(unit.value(pts), RadialConvexFn(alpha, 2).value(pts), rtol=1e-13)
    np.testing.assert_allclose(unit.S, 0.5 * (1.0 + alpha) * np.eye(2))


def test_bump_tail_is_exact_quadratic(bump):
    rng = np.random.default_rng(4)
    dirs = rng.standard_normal((20, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = bump.x0 + rng.uniform(0.51, 2.0, size=20)[:, None] * dirs
    quad = np.einsum("mi,ij,mj->m", pts, bump.S, pts)
    assert np.all(np.abs(bump.value(pts) - quad) <= 1e-12 * np.maximum(1.0, np.abs(quad)))
    expected = 4.0 * bump.c * (1.0 + bump.alpha) / bump.beta ** 2 * np.eye(3)
    np.testing.assert_allclose(bump.hessian(pts), np.broadcast_to(expected, (20, 3, 3)), rtol=1e-14, atol=0)


def test_bump_derivatives_match_finite_differences(bump):
    pts = shell_points(np.random.default_rng(8), 3, 20, center=bump.x0, scale=0.5 * bump.beta)
    jet = bump_eval(bump, pts)
    assert max_relative_error(fd_hessian(bump.gradient, pts), jet.hessian) <= 1e-6
    assert np.max(np.abs(fd_gradient(bump.value, pts) - jet.gradient)) <= 1e-6
    assert np.all(psd_check(jet.cof_hessian))
    np.testing.assert_allclose(jet.cof_hessian, cofactor(jet.hessian), rtol=1e-10, atol=1e-14)


def test_bump_refuses_singular_set(bump):
    with pytest.raises(OnSingularSet):
        bump_eval(bump, bump.x0)
    with pytest.raises(OnSingularSet):
        bump_eval(bump, bump.x0 + np.array([0.5 * bump.beta, 0.0, 0.0]))


def test_construct_bump_rejects_bad_parameters():
    with pytest.raises(InvalidExponent):
        construct_bump(0.5, 2, 1.0, 0.1, 0.1, np.zeros(2), FAST)
    with pytest.raises(InvalidExponent):
        construct_bump(2.0, 3, 1.0, 0.1, 0.0, np.zeros(3), FAST)


def test_alpha_for_threshold():
    assert alpha_for_threshold(1.5) == pytest.approx(1.0 / 3.0)
    with pytest.raises(InvalidExponent):
        alpha_for_threshold(0.0)


# ===== smoothed cone =====

def test_smoothed_cone_hand_values():
    at_origin = smoothed_cone_eval(SmoothedCone(0.2, 3), np.zeros(3))
    np.testing.assert_allclose(at_origin.hessian, 5.0 * np.eye(3))
    assert at_origin.det_hessian == pytest.approx(0.2 ** -3)

    unit = smoothed_cone_eval(SmoothedCone(1.0, 2), np.zeros(2))
    assert unit.value == pytest.approx(1.0)
    assert unit.det_hessian == pytest.approx(1.0)

    jet = smoothed_cone_eval(SmoothedCone(0.5, 2), np.array([0.5, 0.0]))
    assert jet.det_hessian == pytest.approx(1.0, rel=1e-12)
    assert det(jet.hessian) == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.05, max_value=1.0), st.sampled_from([2, 3, 4]))
def test_smoothed_cone_derivatives(eps, n):
    sc = SmoothedCone(eps, n)
    pts = np.random.default_rng(int(eps * 1e6)).uniform(-1.5, 1.5, size=(20, n))
    assert max_relative_error(fd_hessian(sc.gradient, pts), sc.hessian(pts)) <= 1e-6
    d_matrix = det(sc.hessian(pts))
    assert np.all(np.abs(sc.det_hessian(pts) - d_matrix) <= 1e-10 * np.maximum(1.0, np.abs(d_matrix)))


def test_smoothed_cone_sup_gap():
    for eps in (0.5, 0.1, 1e-3):
        r = np.linspace(0.0, 5.0, 2001)
        gap = np.max(np.sqrt(r ** 2 + eps ** 2) - r)
        assert gap == pytest.approx(smoothed_cone_sup_gap(eps), rel=1e-12)


# ===== periodic =====

def test_constant_periodic_field_is_identity():
    field_ = PeriodicField(np.eye(3))
    pts = np.random.default_rng(0).uniform(size=(10, 3))
    np.testing.assert_array_equal(periodic_eval(field_, pts), np.broadcast_to(np.eye(3), (10, 3, 3)))
    assert field_.is_constant


def test_periodic_field_is_periodic():
    rng = np.random.default_rng(21)
    for n in (2, 3):
        field_ = random_periodic_field(n, rng, laminates=1 if n == 3 else 0)
        pts = rng.uniform(size=(100, n))
        A = periodic_eval(field_, pts)
        for e in np.eye(n):
            assert np.max(np.abs(periodic_eval(field_, pts + e) - A)) <= 1e-12


def test_small_periodic_field_is_psd_everywhere():
    # S_base >= Id dominates modes of size 0.001 (2 pi)^2 |k|^2 with |k|^2 <= n
    rng = np.random.default_rng(22)
    for n in (2, 3):
        field_ = random_periodic_field(n, rng, max_freq=1, amplitude=0.001, laminates=1 if n == 3 else 0)
        assert field_.amplitude_scale == 1.0
        assert np.all(psd_check(periodic_eval(field_, rng.uniform(size=(200, n)))))


def test_periodic_amplitudes_rescaled_to_margin():
    field_ = PeriodicField(np.eye(2), trig_coeffs=[((1, 0), 1.0), ((0, 1), 1.0, 0.3)], margin_grid=32)
    assert 0.0 < field_.amplitude_scale < 1.0
    assert len(field_.verification_grid()) == 32 ** 2
    assert np.min(np.linalg.eigvalsh(field_.hessian(field_.verification_grid()))) >= field_.margin - 1e-9
    # the x1 = 0 node sees cos = 1, so the scale is the largest one keeping that node at the margin
    assert field_.amplitude_scale == pytest.approx((1.0 - field_.margin) / (2.0 * math.pi) ** 2, rel=1e-12)


def test_rescaled_field_touches_margin_on_grid():
    rng = np.random.default_rng(31)
    field_ = random_periodic_field(3, rng, amplitude=0.2, laminates=1)
    assert field_.amplitude_scale < 1.0
    min_eig = np.min(np.linalg.eigvalsh(field_.hessian(field_.verification_grid())))
    assert min_eig == pytest.approx(field_.margin, abs=1e-10)


def test_periodic_margin_violation():
    with pytest.raises(ConvexityMarginViolated):
        PeriodicField(np.diag([1.0, 0.0]), trig_coeffs=[((1, 1), 0.1)], margin_grid=16)


def test_laminates_must_be_orthogonal():
    with pytest.raises(ValueError):
        PeriodicField(np.eye(3), laminates=[((1, 0, 0), (1, 0, 0), 0.2)])
    with pytest.raises(ValueError):
        PeriodicField(np.eye(3), laminates=[((1, 0, 0), (0, 1, 0), -0.2)])


# ===== diagonal =====

def make_diagonal(n=2):
    return DiagonalField([PolynomialBump(np.full(n, 0.1 * i), 0.8, 4, 1.0 + i) for i in range(n)])


def test_diagonal_zero_outside_support():
    A, div = diagonal_eval(make_diagonal(), np.array([5.0, 5.0]))
    np.testing.assert_array_equal(A, np.zeros((2, 2)))
    np.testing.assert_array_equal(div, np.zeros(2))


def test_diagonal_divergence_matches_finite_differences():
    field_ = make_diagonal(3)
    pts = np.random.default_rng(9).uniform(-0.5, 0.5, size=(50, 3))
    _, div = diagonal_eval(field_, pts)
    fd = np.stack([fd_gradient(b.value, pts)[:, i] for i, b in enumerate(field_.profiles)], axis=1)
    assert np.max(np.abs(fd - div)) <= 1e-6


def test_diagonal_with_shared_bump_is_psd():
    shared = PolynomialBump(np.zeros(2), 1.0, 3)
    field_ = DiagonalField([shared, shared])
    pts = np.random.default_rng(2).uniform(-1.2, 1.2, size=(100, 2))
    A, _ = diagonal_eval(field_, pts)
    assert np.all(psd_check(A))


# ===== matrix fields =====

def test_field_arithmetic():
    dom = Domain.ball(np.zeros(2), 1.0)
    A = cofactor_field(QuadraticFn(np.diag([1.0, 2.0])), dom)
    B = constant_field(np.eye(2), dom)
    pts = np.random.default_rng(0).uniform(-0.5, 0.5, size=(5, 2))
    np.testing.assert_allclose(((A + B) - B).evaluate(pts), A.evaluate(pts))
    assert (A + B).divergence_free
    assert math.isclose(A(np.array([0.1, 0.2]))[0, 0], 2.0)
