# -*- coding: utf-8 -*-
"""
Tests for matkit: determinants, cofactors, PSD checks and the two determinant inequalities
"""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import NotPSD
from matkit import (
    as_matrix, as_symmetric, cofactor, det, det_lemma_residual, min_eigenvalue,
    minkowski_gap, psd_check, random_psd, symmetrize,
)

dims = st.sampled_from([2, 3, 4])
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def leibniz_det(rows):
    n = len(rows)
    total = Fraction(0)
    for perm in itertools.permutations(range(n)):
        sign = 1
        for i in range(n):
            for j in range(i + 1, n):
                if perm[i] > perm[j]:
                    sign = -sign
        term = Fraction(sign)
        for i in range(n):
            term *= rows[i][perm[i]]
        total += term
    return total


def test_det_of_identity_and_diagonal():
    for n in (2, 3, 4):
        assert det(np.eye(n)) == 1.0
    assert det(np.diag([2.0, 3.0, 4.0])) == 24.0


def test_rejects_unsupported_shapes():
    with pytest.raises(ValueError):
        as_matrix(np.eye(5))
    with pytest.raises(ValueError):
        as_matrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        as_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(seeds, dims)
def test_det_matches_exact_integer_determinant(seed, n):
    M = np.random.default_rng(seed).integers(-9, 10, size=(n, n))
    assert det(M) == float(leibniz_det(M.tolist()))


def test_det_works_on_stacks():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((7, 3, 3))
    stacked = det(M)
    assert stacked.shape == (7,)
    for k in range(7):
        assert stacked[k] == pytest.approx(np.linalg.det(M[k]), rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_cofactor_identity(seed, n):
    M = np.random.default_rng(seed).standard_normal((n, n))
    lhs = M @ cofactor(M)
    expected = det(M) * np.eye(n)
    assert np.max(np.abs(lhs - expected)) <= 1e-10 * (1.0 + abs(det(M)))


def test_cofactor_of_diagonal():
    C = cofactor(np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(C, np.diag([6.0, 3.0, 2.0]))


def test_cofactor_is_adjugate_for_nonsymmetric():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    # adj [[a, b], [c, d]] = [[d, -b], [-c, a]]
    np.testing.assert_array_equal(cofactor(M), np.array([[4.0, -2.0], [-3.0, 1.0]]))


def test_det_of_cofactor_is_power_of_det():
    rng = np.random.default_rng(3)
    for n in (2, 3, 4):
        M = random_psd(rng, n) + np.eye(n)
        assert det(cofactor(M)) == pytest.approx(det(M) ** (n - 1), rel=1e-9)


def test_det_lemma_residual_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        A = rng.standard_normal((n, n))
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        scale = 1.0 + abs(det(A + np.outer(u, v))) + abs(det(A))
        assert det_lemma_residual(A, u, v) <= 1e-12 * scale


def test_psd_check():
    assert psd_check(np.eye(3))
    assert not psd_check(np.diag([1.0, -1.0]))
    assert psd_check(np.diag([1.0, -1e-12]), tol=1e-10)
    flags = psd_check(np.stack([np.eye(2), -np.eye(2)]))
    assert flags.tolist() == [True, False]
    with pytest.raises(ValueError):
        psd_check(np.eye(2), tol=-1.0)


def test_min_eigenvalue_of_diagonal():
    assert min_eigenvalue(np.diag([3.0, -2.0, 5.0])) == pytest.approx(-2.0)


def test_minkowski_equality_for_proportional_matrices():
    assert abs(minkowski_gap(np.eye(2), np.eye(2))) < 1e-12
    assert abs(minkowski_gap(np.eye(3), 4.0 * np.eye(3))) < 1e-12


def test_minkowski_gap_nonnegative_on_random_pairs():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(2, 5))
        A = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
        B = random_psd(rng, n)
        assert minkowski_gap(A, B) >= -1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_minkowski_gap_nonnegative_property(seed, n):
    rng = np.random.default_rng(seed)
    assert minkowski_gap(random_psd(rng, n), random_psd(rng, n)) >= -1e-10


def test_minkowski_rejects_indefinite():
    with pytest.raises(NotPSD):
        minkowski_gap(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(NotPSD):
        minkowski_gap(np.eye(2), np.diag([-1.0, 1.0]))


def test_random_psd_rank_deficient_is_singular():
    rng = np.random.default_rng(5)
    M = random_psd(rng, 4, rank=2)
    assert psd_check(M)
    assert abs(det(M)) < 1e-10


def test_symmetrize_is_exactly_symmetric():
    M = symmetrize(np.random.default_rng(2).standard_normal((3, 3)))
    as_symmetric(M)
