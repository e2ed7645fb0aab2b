# -*- coding: utf-8 -*-
"""
Monge-Ampere Masses and Hardy Norms
Gradient-image masses of radial convex functions, f log(1+f) norms and
the smoothed-cone blow-up series (finite mass, unbounded Hardy norm)
"""

import logging
import concurrent.futures
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from config import get_config
from errors import NegativeInput
from fields import SmoothedCone
from matkit import as_symmetric, det, psd_check
from quadrature import Domain, IntegrationScheme, default_scheme, integrate_ball, integrate_domain, unit_ball_volume

logger = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-12


@dataclass
class RadialProfile:
    """
    phi(x) = g(|x|) for a convex, non-decreasing profile g on [0, inf).
    dg is the right derivative (sup of the subdifferential); d2g, when given,
    is the second derivative where g is smooth.
    """
    g: Callable
    dg: Callable
    name: str
    d2g: Optional[Callable] = None

    def det_density(self, x):
        """det(H phi) = g''(r) (g'(r)/r)^{n-1} for smooth radial phi"""
        if self.d2g is None:
            raise ValueError(f"profile {self.name!r} has no second derivative")
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        r = np.linalg.norm(x, axis=-1)
        return self.d2g(r) * (self.dg(r) / r) ** (n - 1)


def cone_profile() -> RadialProfile:
    """f_0: r on [0, 1], (r^2 + 1)/2 beyond"""
    return RadialProfile(
        g=lambda r: np.where(r <= 1.0, r, 0.5 * (r ** 2 + 1.0)),
        dg=lambda r: np.where(r < 1.0, 1.0, r),
        name="cone",
    )


def f_alpha_profile(alpha: float) -> RadialProfile:
    a = alpha
    return RadialProfile(
        g=lambda r: np.where(r <= 1.0, r ** (1.0 + a) + 0.5 * (a - 1.0), 0.5 * (1.0 + a) * r ** 2),
        dg=lambda r: (1.0 + a) * np.where(r < 1.0, r ** a, r),
        d2g=lambda r: (1.0 + a) * np.where(r < 1.0, a * r ** (a - 1.0), 1.0),
        name=f"f_{alpha:g}",
    )


def smoothed_cone_profile(eps_width: float) -> RadialProfile:
    e2 = eps_width ** 2
    return RadialProfile(
        g=lambda r: np.sqrt(r ** 2 + e2),
        dg=lambda r: r / np.sqrt(r ** 2 + e2),
        d2g=lambda r: e2 * (r ** 2 + e2) ** -1.5,
        name=f"smoothed_cone_{eps_width:g}",
    )


def quadratic_profile() -> RadialProfile:
    return RadialProfile(
        g=lambda r: 0.5 * r ** 2,
        dg=lambda r: r,
        d2g=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        name="quadratic",
    )


def piecewise_quadratic_profile(knots: Sequence[float], curvatures: Sequence[float],
                                slope0: float = 0.0) -> RadialProfile:
    """
    Convex profile with g'' = curvatures[i] on [knots[i], knots[i+1]) (last piece unbounded),
    g'(0+) = slope0 and g(0) = 0.

    Raises:
        ValueError: on negative curvature or slope, or knots not increasing from 0
    """
    knots = np.asarray(knots, dtype=float)
    curv = np.asarray(curvatures, dtype=float)
    if len(knots) != len(curv) or len(knots) == 0 or knots[0] != 0.0 or np.any(np.diff(knots) <= 0):
        raise ValueError("knots must start at 0, increase strictly and match curvatures")
    if np.any(curv < 0) or slope0 < 0:
        raise ValueError("a convex non-decreasing profile needs curvatures >= 0 and slope0 >= 0")

    ends = np.append(knots[1:], np.inf)

    def dg(r):
        r = np.asarray(r, dtype=float)[..., None]
        covered = np.clip(np.minimum(r, ends) - knots, 0.0, None)
        return slope0 + np.sum(curv * covered, axis=-1)

    def g(r):
        r = np.asarray(r, dtype=float)[..., None]
        covered = np.clip(np.minimum(r, ends) - knots, 0.0, None)
        # integral of g' over [0, r], piece by piece
        before = np.concatenate([[0.0], np.cumsum(curv[:-1] * np.diff(knots))])
        return slope0 * r[..., 0] + np.sum(before * covered + 0.5 * curv * covered ** 2, axis=-1)

    def d2g(r):
        idx = np.searchsorted(knots, np.asarray(r, dtype=float), side="right") - 1
        return curv[np.clip(idx, 0, len(curv) - 1)]

    return RadialProfile(g=g, dg=dg, d2g=d2g, name="piecewise_quadratic")


def random_piecewise_profile(rng: np.random.Generator, pieces: int = 4, r_max: float = 2.0) -> RadialProfile:
    inner = np.sort(rng.uniform(0.0, r_max, size=pieces - 1))
    knots = np.concatenate([[0.0], inner])
    return piecewise_quadratic_profile(knots, rng.uniform(0.0, 3.0, size=pieces),
                                       slope0=float(rng.uniform(0.0, 1.0)))


def ma_mass_radial(profile: RadialProfile, r: float, n: int) -> float:
    """
    mu(B_r) = omega_n (sup dg(r))^n for phi(x) = g(|x|): the volume of the
    gradient image of B_r, subdifferential at the origin included.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    return float(unit_ball_volume(n) * float(profile.dg(r)) ** n)


def _nonnegative(values: np.ndarray, where: str) -> np.ndarray:
    if np.any(values < -NEGATIVE_TOL):
        raise NegativeInput(f"{where}: minimum sample {float(np.min(values)):.3e} is negative")
    return np.clip(values, 0.0, None)


def hardy_density(values) -> np.ndarray:
    values = _nonnegative(np.asarray(values, dtype=float), "hardy_density")
    return values * np.log1p(values)


def hardy_norm(f: Callable, domain: Domain, scheme: Optional[IntegrationScheme] = None,
               breaks: Sequence[float] = ()) -> float:
    """
    Integral of f log(1 + f) over the domain (dyadic shells on balls, grids on cubes and tori).

    Raises:
        NegativeInput: if f < -1e-12 at some node
    """
    scheme = scheme or default_scheme()
    return float(integrate_domain(lambda x: hardy_density(f(x)), domain, scheme, breaks=breaks))


def _blowup_row(eps: float, n: int, scheme: IntegrationScheme, baseline: Optional[np.ndarray]) -> dict:
    cone = SmoothedCone(eps, n)
    mass = float(integrate_ball(cone.det_hessian, n, scheme, radius=0.5).total)
    unit_ball = Domain.ball(np.zeros(n), 1.0)
    row = {
        "epsilon": float(eps),
        "mass": mass,
        "hardy": hardy_norm(cone.det_hessian, unit_ball, scheme),
    }
    if baseline is not None:
        perturbed = lambda x: det(baseline[None, :, :] + cone.hessian(x))
        row["hardy_perturbed"] = hardy_norm(perturbed, unit_ball, scheme)
    return row


def hardy_blowup_series(eps_list: Sequence[float], n: int, scheme: Optional[IntegrationScheme] = None,
                        baseline=None, workers: Optional[int] = None) -> pd.DataFrame:
    """
    For each smoothing width: mass of det(H phi_eps) over B_{1/2} (tends to omega_n)
    and its Hardy norm over B_1 (grows like n omega_n log(1/eps)).
    A PSD baseline M adds the column hardy(det(M + H phi_eps)).

    Returns:
        DataFrame with columns epsilon, mass, hardy [, hardy_perturbed]
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps_list is empty")
    if any(not 0.0 < e <= 0.25 for e in eps_list):
        raise ValueError("every epsilon must lie in (0, 1/4]")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if baseline is not None:
        baseline = as_symmetric(baseline)
        if baseline.shape != (n, n) or not psd_check(baseline):
            raise ValueError("baseline must be a PSD n x n matrix")

    scheme = scheme or default_scheme()
    workers = workers or get_config("workers", 4)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(lambda e: _blowup_row(e, n, scheme, baseline), eps_list))

    frame = pd.DataFrame(rows)
    logger.info(f"[OK] hardy blow-up series: {len(frame)} widths, n={n}")
    return frame


def blowup_slope(frame: pd.DataFrame):
    """Least-squares slope and R^2 of hardy against log(1/eps)"""
    fit = linregress(np.log(1.0 / frame["epsilon"].to_numpy()), frame["hardy"].to_numpy())
    return float(fit.slope), float(fit.rvalue ** 2)


if __name__ == "__main__":
    print("=== measures smoke test ===")
    n = 2
    mass = ma_mass_radial(smoothed_cone_profile(0.5), 0.5, n)
    print(f"{'[OK]' if abs(mass - np.pi / 2) < 1e-12 else '[X]'} smoothed cone mass r=eps=0.5: {mass}")
    series = hardy_blowup_series([2.0 ** -k for k in range(4, 8)], n)
    print(series.to_string(index=False))
