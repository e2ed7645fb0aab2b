# -*- coding: utf-8 -*-
"""
Weak Identity Checks
Pairings of matrix fields and convex functions against compactly supported
polynomial test bumps: weak divergence, weak Hessian, distributional Jacobian
"""

import logging
import concurrent.futures
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import get_config
from fields import HessianFamily, MatrixField, PolynomialBump, QuadraticFn
from matkit import frobenius_norm
from quadrature import IntegrationScheme, default_scheme, integrate_ball

logger = logging.getLogger(__name__)

TEST_POWER = 8


class TestFunction(PolynomialBump):
    """eta = amplitude * ((1 - |x - center|^2 / radius^2)_+)^power, C^2 for power >= 3"""

    __test__ = False

    def __post_init__(self):
        super().__post_init__()
        if self.power < 3:
            raise ValueError(f"test functions need power >= 3 for C^2 regularity, got {self.power}")


def make_test_function(center, radius: float, power: int = TEST_POWER, amplitude: float = 1.0) -> TestFunction:
    return TestFunction(center=np.asarray(center, dtype=float), radius=float(radius),
                        power=power, amplitude=amplitude)


def bump_corpus(rng: np.random.Generator, center, radius: float, count: int = 10,
                power: int = TEST_POWER) -> List[TestFunction]:
    """
    count bumps with supports inside B_radius(center). Same rng state gives the same corpus.
    """
    center = np.asarray(center, dtype=float)
    n = len(center)
    corpus = []
    for _ in range(count):
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        offset = radius * 0.5 * rng.uniform(0.0, 1.0)
        c = center + offset * direction
        rho = (radius - offset) * rng.uniform(0.3, 0.9)
        corpus.append(make_test_function(c, rho, power, amplitude=float(rng.uniform(0.5, 2.0))))
    return corpus


@dataclass
class GradientMap:
    """u = grad f for a family with closed-form Hessian, so grad u = Hf"""
    family: HessianFamily

    @property
    def n(self) -> int:
        return self.family.n

    @property
    def center(self):
        return self.family.center

    @property
    def break_radii(self):
        return tuple(self.family.break_radii)

    def value(self, x):
        return self.family.gradient(x)

    def cof_jacobian(self, x):
        return self.family.cof_hessian(x)


def linear_map(scale: float, n: int) -> GradientMap:
    """u(x) = scale * x as the gradient of scale/2 |x|^2"""
    return GradientMap(QuadraticFn(scale * np.eye(n)))


def _pairing_ball(eta: TestFunction, center, break_radii: Sequence[float]) -> Tuple[np.ndarray, float, Tuple[float, ...]]:
    """
    Ball for integrating against eta. Around the singular center when eta's
    support reaches it or crosses a break sphere, so shells and breaks line up
    with the singular set; otherwise around eta itself.
    """
    if center is not None:
        center = np.asarray(center, dtype=float)
        dist = float(np.linalg.norm(eta.center - center))
        crosses = any(dist - eta.radius < b < dist + eta.radius for b in break_radii)
        if dist < eta.radius or crosses:
            return center, dist + eta.radius, tuple(break_radii)
    return eta.center, eta.radius, ()


def _integrate_against(g, eta: TestFunction, n: int, scheme: IntegrationScheme, center=None,
                       break_radii: Sequence[float] = ()):
    ball_center, R, breaks = _pairing_ball(eta, center, break_radii)
    return integrate_ball(g, n, scheme, center=ball_center, radius=R, breaks=breaks).total


def weak_divergence_residual(A: MatrixField, eta: TestFunction,
                             scheme: Optional[IntegrationScheme] = None) -> np.ndarray:
    """
    r_i = integral of sum_j A_ij d_j eta. Zero for weakly divergence-free A.

    Raises:
        NonFiniteSample: if A is NaN/inf at a node
    """
    scheme = scheme or default_scheme()

    def integrand(x):
        return np.einsum("mij,mj->mi", A.evaluate(x), eta.gradient(x))

    return np.asarray(_integrate_against(integrand, eta, A.n, scheme, A.center, A.break_radii))


def divergence_normalizer(A: MatrixField, eta: TestFunction,
                          scheme: Optional[IntegrationScheme] = None) -> float:
    """integral of |A|_F |grad eta|"""
    scheme = scheme or default_scheme()

    def integrand(x):
        return frobenius_norm(A.evaluate(x)) * np.linalg.norm(eta.gradient(x), axis=1)

    return float(_integrate_against(integrand, eta, A.n, scheme, A.center, A.break_radii))


def normalized_divergence_residual(A: MatrixField, eta: TestFunction,
                                   scheme: Optional[IntegrationScheme] = None) -> float:
    """|r| / integral |A| |grad eta|, 0 when the normalizer vanishes"""
    scheme = scheme or default_scheme()
    r = weak_divergence_residual(A, eta, scheme)
    norm = divergence_normalizer(A, eta, scheme)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(r) / norm)


def max_divergence_residual(A: MatrixField, corpus: Sequence[TestFunction],
                            scheme: Optional[IntegrationScheme] = None,
                            workers: Optional[int] = None) -> float:
    """Largest normalized residual over a corpus of test bumps"""
    scheme = scheme or default_scheme()
    workers = workers or get_config("workers", 4)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        residuals = list(executor.map(lambda eta: normalized_divergence_residual(A, eta, scheme), corpus))
    worst = max(residuals) if residuals else 0.0
    logger.info(f"[i] {A.name}: max normalized divergence residual {worst:.3e} over {len(corpus)} bumps")
    return worst


def weak_hessian_residual(f: HessianFamily, eta: TestFunction, i: int, j: int,
                          scheme: Optional[IntegrationScheme] = None) -> float:
    """
    |integral f d_ij eta - integral eta (Hf)_ij|

    Raises:
        NonFiniteSample: if f or its Hessian is NaN/inf at a node
    """
    scheme = scheme or default_scheme()
    n = f.n
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"indices ({i}, {j}) out of range for n={n}")

    def integrand(x):
        return f.value(x) * eta.hessian(x)[:, i, j] - eta.value(x) * f.hessian(x)[:, i, j]

    return float(abs(_integrate_against(integrand, eta, n, scheme, f.center, f.break_radii)))


def distributional_jacobian(u: GradientMap, eta: TestFunction,
                            scheme: Optional[IntegrationScheme] = None) -> float:
    """
    Jac(u)(eta) = -(1/n) integral <cof(grad u) u, grad eta>

    Raises:
        NonFiniteSample: if u is NaN/inf at a node
    """
    scheme = scheme or default_scheme()
    n = u.n

    def integrand(x):
        cu = np.einsum("mij,mj->mi", u.cof_jacobian(x), u.value(x))
        return np.sum(cu * eta.gradient(x), axis=1)

    return float(-_integrate_against(integrand, eta, n, scheme, u.center, u.break_radii) / n)


def fd_divergence(A: MatrixField, x, h: float = 1e-4) -> np.ndarray:
    """Central-difference row divergence sum_j (A_ij(x + h e_j) - A_ij(x - h e_j)) / 2h"""
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    n = A.n
    steps = h * np.eye(n)
    plus = A.evaluate(x[None, :] + steps)
    minus = A.evaluate(x[None, :] - steps)
    # plus[j] is A at x + h e_j
    return np.einsum("jij->i", plus - minus) / (2.0 * h)


def fd_gradient(value, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function at each row of x, shape (m, n)"""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    cols = [(value(x + h * e) - value(x - h * e)) / (2.0 * h) for e in np.eye(n)]
    return np.stack(cols, axis=1)


def fd_hessian(gradient, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of a closed-form gradient, shape (m, n, n)"""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    cols = [(gradient(x + h * e) - gradient(x - h * e)) / (2.0 * h) for e in np.eye(n)]
    return np.stack(cols, axis=2)


if __name__ == "__main__":
    from fields import RadialConvexFn, cofactor_field
    from quadrature import Domain

    print("=== weakcalc smoke test ===")
    eta = make_test_function([0.1, 0.0], 0.3)
    jac = distributional_jacobian(linear_map(1.0, 2), eta)
    mass = float(integrate_ball(eta.value, 2, default_scheme(), center=eta.center, radius=eta.radius).total)
    print(f"{'[OK]' if abs(jac - mass) < 1e-8 else '[X]'} Jac(x)(eta) = {jac:.10f}, integral eta = {mass:.10f}")

    field_ = cofactor_field(RadialConvexFn(0.5, 2), Domain.ball([0.0, 0.0], 2.0))
    print(f"[i] fd divergence of cof(Hf_0.5) at r=0.5: {fd_divergence(field_, [0.5, 0.0])}")
