# -*- coding: utf-8 -*-
"""
Singularity-Aware Quadrature
Dyadic-annulus integration about a point, tensor grids on cubes and tori,
L^p shell ledgers and blow-up exponent fitting
"""

import math
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import roots_gegenbauer, roots_legendre
from scipy.stats import linregress

from config import get_config
from errors import NonFiniteSample, NotSingular

logger = logging.getLogger(__name__)

# converged <=> tail_ratio < 1 - CONVERGENCE_MARGIN
CONVERGENCE_MARGIN = 1e-3
# fitted exponents within this of zero count as no singularity
SLOPE_TOL = 1e-9


class _Divergent:
    """Value returned in place of a number for non-integrable powers"""

    def __repr__(self):
        return "Divergent"

    def __bool__(self):
        return False


Divergent = _Divergent()


@dataclass(frozen=True)
class IntegrationScheme:
    """
    Quadrature parameters.

    dyadic_depth: K annuli R 2^{-k-1} < r < R 2^{-k}, k = 0..K-1
    nodes_per_annulus: Gauss-Legendre order in the radius
    angular_order: Gauss order in each polar angle (azimuth uses twice as many equal-angle nodes)
    grid_resolution: nodes per axis on cubes and tori
    """
    dyadic_depth: int = 20
    nodes_per_annulus: int = 12
    angular_order: int = 24
    grid_resolution: int = 64
    summation: str = "pairwise"

    def __post_init__(self):
        if self.dyadic_depth < 1:
            raise ValueError("dyadic_depth must be >= 1")
        if self.nodes_per_annulus < 1 or self.angular_order < 1 or self.grid_resolution < 1:
            raise ValueError("node counts must be positive")
        if self.summation != "pairwise":
            raise ValueError("only pairwise summation is supported")

    def refined(self) -> "IntegrationScheme":
        """One refinement step: more nodes everywhere, two extra shells"""
        return replace(
            self,
            dyadic_depth=self.dyadic_depth + 2,
            nodes_per_annulus=int(math.ceil(self.nodes_per_annulus * 1.5)),
            angular_order=int(math.ceil(self.angular_order * 1.5)),
            grid_resolution=self.grid_resolution * 2,
        )

    def to_dict(self) -> dict:
        return {
            "dyadic_depth": self.dyadic_depth,
            "nodes_per_annulus": self.nodes_per_annulus,
            "angular_order": self.angular_order,
            "grid_resolution": self.grid_resolution,
            "summation": self.summation,
        }


def default_scheme(**overrides) -> IntegrationScheme:
    """Scheme built from config (DETLAB_* env vars), with keyword overrides"""
    params = {
        "dyadic_depth": get_config("default_depth", 20),
        "nodes_per_annulus": get_config("radial_order", 12),
        "angular_order": get_config("angular_order", 24),
        "grid_resolution": get_config("grid_resolution", 64),
    }
    params.update({k: v for k, v in overrides.items() if v is not None})
    return IntegrationScheme(**params)


@dataclass(frozen=True)
class Domain:
    """Integration domain: a ball, an axis-aligned cube, or the unit torus"""
    kind: str
    n: int
    center: Optional[Tuple[float, ...]] = None
    radius: Optional[float] = None
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None

    @staticmethod
    def ball(center, radius: float) -> "Domain":
        center = tuple(float(c) for c in center)
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        return Domain(kind="ball", n=len(center), center=center, radius=float(radius))

    @staticmethod
    def cube(lower, upper) -> "Domain":
        lower = tuple(float(c) for c in lower)
        upper = tuple(float(c) for c in upper)
        if len(lower) != len(upper) or any(hi <= lo for lo, hi in zip(lower, upper)):
            raise ValueError("cube needs lower < upper in every coordinate")
        return Domain(kind="cube", n=len(lower), lower=lower, upper=upper)

    @staticmethod
    def torus(n: int) -> "Domain":
        return Domain(kind="torus", n=n)


def unit_ball_volume(n: int) -> float:
    """omega_n = |B_1| in R^n"""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def ball_power_integral(s: float, n: int, R: float):
    """
    Integral of ||x||^s over B_R in R^n, or Divergent when s + n <= 0.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if s + n <= 0:
        return Divergent
    return n * unit_ball_volume(n) * R ** (s + n) / (s + n)


@lru_cache(maxsize=None)
def sphere_rule(n: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product rule on the unit sphere S^{n-1}.

    Azimuth: 2*order equal-angle nodes. Polar angles theta_k: Gauss-Gegenbauer
    nodes in t = cos(theta_k) for the weight sin^{m_k} dtheta = (1-t^2)^{(m_k-1)/2} dt.
    Weights sum to the surface area n * omega_n.
    """
    n_phi = 2 * order
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    weights = np.full(n_phi, 2.0 * np.pi / n_phi)

    # Build up one polar angle at a time: x = (cos theta, sin theta * previous)
    for dim in range(3, n + 1):
        m = dim - 2
        t, w = roots_gegenbauer(order, m / 2.0) if m > 1 else roots_legendre(order)
        sin_t = np.sqrt(1.0 - t ** 2)
        new_dirs = np.concatenate(
            [
                np.repeat(t, len(dirs))[:, None],
                (sin_t[:, None, None] * dirs[None, :, :]).reshape(-1, dim - 1),
            ],
            axis=1,
        )
        weights = (w[:, None] * weights[None, :]).reshape(-1)
        dirs = new_dirs

    dirs.setflags(write=False)
    weights.setflags(write=False)
    return dirs, weights


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    t, w = roots_legendre(order)
    return t, w


def _check_finite(values, where: str):
    if not np.all(np.isfinite(values)):
        raise NonFiniteSample(f"Non-finite integrand sample in {where}")


def _annulus_pieces(a: float, b: float, breaks: Sequence[float]):
    """Split (a, b) at any break radius strictly inside it"""
    cuts = sorted(t for t in breaks if a < t < b)
    edges = [a] + cuts + [b]
    return list(zip(edges[:-1], edges[1:]))


@dataclass
class ShellLedger:
    """Per-annulus integrals of an integrand about a center point"""
    shells: np.ndarray
    total: np.ndarray
    center: np.ndarray
    radius: float
    inner_radius: float

    def to_frame(self) -> pd.DataFrame:
        k = np.arange(len(self.shells))
        flat = np.asarray(self.shells).reshape(len(self.shells), -1)
        frame = pd.DataFrame({
            "k": k,
            "r_inner": self.radius * 2.0 ** (-k - 1),
            "r_outer": self.radius * 2.0 ** (-k),
        })
        if flat.shape[1] == 1:
            frame["integral"] = flat[:, 0]
        else:
            for c in range(flat.shape[1]):
                frame[f"integral_{c}"] = flat[:, c]
        return frame


def integrate_ball(g: Callable[[np.ndarray], np.ndarray], n: int, scheme: IntegrationScheme,
                   center=None, radius: float = 1.0, breaks: Sequence[float] = ()) -> ShellLedger:
    """
    Integrate g over B_radius(center) minus the inner ball of radius radius*2^{-K}.

    g maps points of shape (m, n) to values of shape (m,) or (m, ...).
    Annuli are integrated with Gauss-Legendre in r times the sphere rule;
    any break radius (distance from center) inside an annulus splits it.

    Raises:
        NonFiniteSample: if g is NaN/inf at some node
    """
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    dirs, w_sphere = sphere_rule(n, scheme.angular_order)
    t, w_rad = _gauss_legendre(scheme.nodes_per_annulus)

    shells = []
    value_shape = ()
    for k in range(scheme.dyadic_depth):
        a = radius * 2.0 ** (-k - 1)
        b = radius * 2.0 ** (-k)
        shell = 0.0
        for lo, hi in _annulus_pieces(a, b, breaks):
            half = 0.5 * (hi - lo)
            r = half * t + 0.5 * (hi + lo)
            w_r = half * w_rad * r ** (n - 1)
            points = center + (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
            weights = (w_r[:, None] * w_sphere[None, :]).reshape(-1)

            values = np.asarray(g(points), dtype=float)
            _check_finite(values, f"integrate_ball shell {k}")
            value_shape = values.shape[1:]
            values = values.reshape(len(weights), -1)
            shell = shell + np.sum(weights[:, None] * values, axis=0)
        shells.append(shell)

    shells = np.array(shells).reshape((scheme.dyadic_depth,) + value_shape)
    total = np.sum(shells, axis=0)

    return ShellLedger(
        shells=shells,
        total=total,
        center=center,
        radius=float(radius),
        inner_radius=radius * 2.0 ** (-scheme.dyadic_depth),
    )


@lru_cache(maxsize=None)
def _composite_rule(lower: float, upper: float, nodes: int, order: int = 4):
    cells = max(1, nodes // order)
    t, w = roots_legendre(order)
    edges = np.linspace(lower, upper, cells + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * t[None, :]).reshape(-1)
    wx = (half[:, None] * w[None, :]).reshape(-1)
    return x, wx


def cube_nodes(lower, upper, scheme: IntegrationScheme):
    """Tensor composite Gauss-Legendre nodes and weights on [lower, upper]"""
    axes = [_composite_rule(float(lo), float(hi), scheme.grid_resolution) for lo, hi in zip(lower, upper)]
    grids = np.meshgrid(*[x for x, _ in axes], indexing="ij")
    wgrids = np.meshgrid(*[w for _, w in axes], indexing="ij")
    points = np.stack([grid.reshape(-1) for grid in grids], axis=1)
    weights = np.prod(np.stack([w.reshape(-1) for w in wgrids], axis=1), axis=1)
    return points, weights


def integrate_cube(g: Callable[[np.ndarray], np.ndarray], lower, upper, scheme: IntegrationScheme):
    """Integral of g over an axis-aligned cube by composite tensor Gauss-Legendre"""
    points, weights = cube_nodes(lower, upper, scheme)
    values = np.asarray(g(points), dtype=float)
    _check_finite(values, "integrate_cube")
    flat = values.reshape(len(weights), -1)
    total = np.sum(weights[:, None] * flat, axis=0)
    return total.reshape(values.shape[1:]) if values.ndim > 1 else total[0]


def torus_nodes(n: int, scheme: IntegrationScheme) -> np.ndarray:
    """The lattice j/N, j in {0..N-1}^n, as an (N^n, n) array"""
    N = scheme.grid_resolution
    axis = np.arange(N) / N
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([grid.reshape(-1) for grid in grids], axis=1)


def integrate_torus(g: Callable[[np.ndarray], np.ndarray], n: int, scheme: IntegrationScheme):
    """
    Mean of a Z^n-periodic g over the unit torus by the rectangle rule
    (exact for trigonometric polynomials of degree < grid_resolution).
    """
    points = torus_nodes(n, scheme)
    values = np.asarray(g(points), dtype=float)
    _check_finite(values, "integrate_torus")
    flat = values.reshape(len(points), -1)
    mean = np.sum(flat, axis=0) / len(points)
    return mean.reshape(values.shape[1:]) if values.ndim > 1 else mean[0]


def integrate_domain(g: Callable[[np.ndarray], np.ndarray], domain: Domain, scheme: IntegrationScheme,
                     breaks: Sequence[float] = ()):
    """Integral over a Domain (the torus has unit volume, so this is also the mean)"""
    if domain.kind == "ball":
        return integrate_ball(g, domain.n, scheme, center=domain.center,
                              radius=domain.radius, breaks=breaks).total
    if domain.kind == "cube":
        return integrate_cube(g, domain.lower, domain.upper, scheme)
    if domain.kind == "torus":
        return integrate_torus(g, domain.n, scheme)
    raise ValueError(f"Unknown domain kind {domain.kind!r}")


@dataclass
class LpReport:
    """Shell ledger of |g|^p with the fitted local power law"""
    p: float
    n: int
    shell_integrals: np.ndarray
    outer_integral: float
    converged: bool
    fitted_exponent: float
    threshold_q: float
    tail_ratio: float
    fit_r2: float
    radius: float = 1.0
    fit_window: Tuple[int, int] = field(default=(0, 0))

    @property
    def lp_norm(self) -> float:
        return self.outer_integral ** (1.0 / self.p)

    def to_frame(self) -> pd.DataFrame:
        k = np.arange(len(self.shell_integrals))
        return pd.DataFrame({
            "k": k,
            "r_inner": self.radius * 2.0 ** (-k - 1),
            "r_outer": self.radius * 2.0 ** (-k),
            "shell_integral": self.shell_integrals,
        })

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "outer_integral": float(self.outer_integral),
            "converged": bool(self.converged),
            "fitted_exponent": float(self.fitted_exponent),
            "threshold_q": float(self.threshold_q),
            "tail_ratio": float(self.tail_ratio),
            "fit_r2": float(self.fit_r2),
            "fit_window": [int(k) for k in self.fit_window],
            "shell_integrals": [float(v) for v in self.shell_integrals],
        }


def fit_shell_exponent(shells: np.ndarray, p: float, n: int, window: Optional[Tuple[int, int]] = None):
    """
    Least-squares slope of log2(shell_k) against k.
    For |g| ~ r^s, shell_k ~ 2^{-k(sp+n)}, so s = (-slope - n)/p.

    Returns:
        (s, r2, window)
    """
    K = len(shells)
    if window is None:
        start = K // 2 if K >= 4 else 0
        window = (start, K)
    ks = np.arange(*window)
    vals = np.asarray(shells, dtype=float)[window[0]:window[1]]
    mask = vals > 0
    if mask.sum() < 2:
        # Nothing left in the deep shells: no singularity to speak of
        return math.inf, 1.0, window
    fit = linregress(ks[mask], np.log2(vals[mask]))
    s = (-fit.slope - n) / p
    r2 = fit.rvalue ** 2 if mask.sum() > 2 else 1.0
    return s, r2, window


def lp_dyadic(g: Callable[[np.ndarray], np.ndarray], p: float, n: int, scheme: IntegrationScheme,
              center=None, radius: float = 1.0, breaks: Sequence[float] = ()) -> LpReport:
    """
    Shell integrals of |g|^p over dyadic annuli and the local power law they reveal.

    Raises:
        NonFiniteSample: if g is NaN/inf at some node
    """
    if p < 1:
        raise ValueError("p must be >= 1")

    ledger = integrate_ball(lambda x: np.abs(g(x)) ** p, n, scheme, center=center,
                            radius=radius, breaks=breaks)
    shells = np.asarray(ledger.shells, dtype=float)

    s, r2, window = fit_shell_exponent(shells, p, n)
    threshold = n / (-s) if s < -SLOPE_TOL else math.inf

    if len(shells) >= 2 and shells[-2] > 0:
        tail_ratio = float(shells[-1] / shells[-2])
    else:
        tail_ratio = 0.0

    report = LpReport(
        p=float(p),
        n=n,
        shell_integrals=shells,
        outer_integral=float(ledger.total),
        converged=tail_ratio < 1.0 - CONVERGENCE_MARGIN,
        fitted_exponent=float(s),
        threshold_q=float(threshold),
        tail_ratio=tail_ratio,
        fit_r2=float(r2),
        radius=float(radius),
        fit_window=window,
    )
    logger.debug(f"[i] lp_dyadic p={p} n={n}: s={s:.6g}, q*={threshold:.6g}, tail={tail_ratio:.6g}")
    return report


def fit_threshold(report: LpReport, n: int) -> float:
    """
    q* = n / (-s): sup of exponents q with g in L^q near the center.

    Raises:
        NotSingular: if the fitted exponent is >= 0
    """
    s = report.fitted_exponent
    if not s < -SLOPE_TOL:
        raise NotSingular(f"fitted exponent {s} is not negative")
    return n / (-s)


if __name__ == "__main__":
    print("=== quadrature smoke test ===")
    scheme = default_scheme()
    ledger = integrate_ball(lambda x: np.ones(len(x)), 2, scheme)
    expected = math.pi - math.pi * 4.0 ** (-scheme.dyadic_depth)
    ok = abs(ledger.total - expected) < 1e-10
    print(f"{'[OK]' if ok else '[X]'} area of B_1 minus inner ball: {ledger.total:.12f}")
    report = lp_dyadic(lambda x: 1.0 / np.linalg.norm(x, axis=1), 2.0, 2, scheme)
    print(f"[i] r^-1 in L^2(R^2): converged={report.converged}, tail={report.tail_ratio:.6f}")
