# -*- coding: utf-8 -*-
"""
Explicit Convex Functions and Matrix Fields
The radial family f_alpha, its localized bump, the smoothed cone, periodic
cofactor fields on the torus and diagonal bump fields, all with closed-form
derivatives, plus the MatrixField wrapper consumed by the verification layer
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from errors import ConvexityMarginViolated, InvalidExponent, OnSingularSet
from matkit import as_symmetric, cofactor, det, min_eigenvalue, symmetrize
from quadrature import Domain, IntegrationScheme, default_scheme, lp_dyadic, torus_nodes

logger = logging.getLogger(__name__)

SINGULAR_TOL = 1e-12
PERIODIC_MARGIN = 1e-6


# ===== Exponent bookkeeping =====

def critical_exponent(p: float, n: int) -> float:
    """p* = max(0, (p(n-1) - n) / (p(n-1)))"""
    if p < 1 or n < 2:
        raise InvalidExponent(f"critical exponent needs p >= 1 and n >= 2 (got p={p}, n={n})")
    return max(0.0, (p * (n - 1) - n) / (p * (n - 1)))


def alpha_for_threshold(target_q: float) -> float:
    """Solve 1/(1 - alpha) = target_q for alpha"""
    if target_q <= 0:
        raise InvalidExponent(f"target exponent must be positive, got {target_q}")
    return 1.0 - 1.0 / target_q


def sobolev_range(alpha: float, p: float, n: int) -> bool:
    """f_alpha in W^{2,p}_loc: alpha >= 0 and (p < n or alpha > (p - n)/p)"""
    if alpha < 0:
        return False
    return p < n or alpha > (p - n) / p


def cofactor_integrable(alpha: float, p: float, n: int) -> bool:
    """cof(H f_alpha) in L^p_loc iff (n-1)(1-alpha)p < n"""
    return (n - 1) * (1.0 - alpha) * p < n


def _points(x, n: int) -> Tuple[np.ndarray, bool]:
    """(m, n) array plus a flag telling whether a single point was passed"""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.shape[-1] != n:
        raise ValueError(f"Expected points in R^{n}, got shape {x.shape}")
    return pts, single


# ===== Jets =====

@dataclass
class RadialJet:
    """Value, gradient, Hessian, det(Hessian) and cof(Hessian) at a point (or a stack of points)"""
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    det_hessian: np.ndarray
    cof_hessian: np.ndarray


class HessianFamily:
    """
    Shared evaluation surface. Subclasses implement value/gradient/hessian/det_hessian
    on (m, n) arrays; center and break_radii tell the quadrature where the
    field concentrates and where its Hessian jumps.
    """
    n: int
    center: Optional[np.ndarray] = None
    break_radii: Tuple[float, ...] = ()

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def det_hessian(self, x):
        return det(self.hessian(x))

    def cof_hessian(self, x):
        return cofactor(self.hessian(x))

    def jet(self, x) -> RadialJet:
        pts, single = _points(x, self.n)
        hess = self.hessian(pts)
        jet = RadialJet(
            value=self.value(pts),
            gradient=self.gradient(pts),
            hessian=hess,
            det_hessian=self.det_hessian(pts),
            cof_hessian=cofactor(hess),
        )
        if single:
            jet = RadialJet(
                value=float(jet.value[0]),
                gradient=jet.gradient[0],
                hessian=jet.hessian[0],
                det_hessian=float(jet.det_hessian[0]),
                cof_hessian=jet.cof_hessian[0],
            )
        return jet


# ===== f_alpha =====

@dataclass
class RadialConvexFn(HessianFamily):
    """
    f_alpha(x) = ||x||^{1+alpha} + (alpha-1)/2 for ||x|| <= 1, (1+alpha)/2 ||x||^2 outside.
    C^1 away from the origin, convex, singular set {0} u {||x|| = 1}.
    """
    alpha: float
    n: int

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidExponent(f"alpha must be >= 0, got {self.alpha}")
        self.center = np.zeros(self.n)
        self.break_radii = (1.0,)

    def _radius(self, x):
        pts, _ = _points(x, self.n)
        return pts, np.linalg.norm(pts, axis=1)

    def _check_regular(self, r):
        bad = (np.abs(r) <= SINGULAR_TOL) | (np.abs(r - 1.0) <= SINGULAR_TOL)
        if np.any(bad):
            raise OnSingularSet(f"f_alpha evaluated within {SINGULAR_TOL} of ||x|| in {{0, 1}}")

    def value(self, x):
        pts, r = self._radius(x)
        a = self.alpha
        return np.where(r <= 1.0, r ** (1.0 + a) + 0.5 * (a - 1.0), 0.5 * (1.0 + a) * r ** 2)

    def gradient(self, x):
        pts, r = self._radius(x)
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = (1.0 + a) * np.where(r > 0, r, 1.0) ** (a - 1.0)
        factor = np.where(r <= 1.0, inner, 1.0 + a)
        return factor[:, None] * pts

    def hessian(self, x):
        pts, r = self._radius(x)
        self._check_regular(r)
        a, n = self.alpha, self.n
        eye = np.eye(n)[None, :, :]
        outer = pts[:, :, None] * pts[:, None, :]
        inner = (1.0 + a) * (r[:, None, None] ** (a - 1.0) * eye
                             + (a - 1.0) * r[:, None, None] ** (a - 3.0) * outer)
        return np.where((r <= 1.0)[:, None, None], inner, (1.0 + a) * eye)

    def det_hessian(self, x):
        pts, r = self._radius(x)
        self._check_regular(r)
        a, n = self.alpha, self.n
        inner = a * (1.0 + a) ** n * r ** (n * (a - 1.0))
        return np.where(r <= 1.0, inner, (1.0 + a) ** n)


def radial_eval(fn: RadialConvexFn, x) -> RadialJet:
    """
    Closed-form jet of f_alpha at x.

    Raises:
        OnSingularSet: if ||x|| is within 1e-12 of 0 or 1
    """
    return fn.jet(x)


# ===== Localized bump =====

@dataclass
class BumpField(HessianFamily):
    """
    phi(x) = c [ f_alpha(2(x - x0)/beta) - 2(1+alpha)/beta^2 (||x0||^2 - 2<x, x0>) ].
    Equal to x^T S x with S = 2c(1+alpha)/beta^2 Id for ||x - x0|| >= beta/2.
    """
    p: float
    n: int
    beta: float
    delta: float
    eps: float
    x0: np.ndarray
    alpha: float
    c: float
    S: np.ndarray = field(repr=False, default=None)
    unit_lp_norm: float = math.nan

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self._base = RadialConvexFn(self.alpha, self.n)
        if self.S is None:
            self.S = 2.0 * self.c * (1.0 + self.alpha) / self.beta ** 2 * np.eye(self.n)
        self.center = self.x0
        self.break_radii = (0.5 * self.beta,)

    @property
    def tail_hessian(self) -> np.ndarray:
        """Constant Hessian 2S = 4c(1+alpha)/beta^2 Id outside B_{beta/2}(x0)"""
        return 2.0 * self.S

    def _y(self, x):
        pts, _ = _points(x, self.n)
        return pts, 2.0 / self.beta * (pts - self.x0)

    def value(self, x):
        pts, y = self._y(x)
        a, b = self.alpha, self.beta
        shift = 2.0 * (1.0 + a) / b ** 2 * (self.x0 @ self.x0 - 2.0 * pts @ self.x0)
        return self.c * (self._base.value(y) - shift)

    def gradient(self, x):
        pts, y = self._y(x)
        a, b = self.alpha, self.beta
        return self.c * (2.0 / b * self._base.gradient(y) + 4.0 * (1.0 + a) / b ** 2 * self.x0)

    def hessian(self, x):
        _, y = self._y(x)
        return self.c * 4.0 / self.beta ** 2 * self._base.hessian(y)

    def det_hessian(self, x):
        _, y = self._y(x)
        return (self.c * 4.0 / self.beta ** 2) ** self.n * self._base.det_hessian(y)

    def cof_hessian(self, x):
        _, y = self._y(x)
        return (self.c * 4.0 / self.beta ** 2) ** (self.n - 1) * cofactor(self._base.hessian(y))


def _cofactor_lp_norm(field_: BumpField, p: float, scheme: IntegrationScheme) -> float:
    """||cof(H phi)||_{L^p(B_beta(x0))}, Frobenius norm pointwise"""
    g = lambda x: np.sqrt(np.sum(field_.cof_hessian(x) ** 2, axis=(1, 2)))
    report = lp_dyadic(g, p, field_.n, scheme, center=field_.x0, radius=field_.beta,
                       breaks=field_.break_radii)
    return report.lp_norm


def construct_bump(p: float, n: int, beta: float, delta: float, eps: float, x0,
                   scheme: Optional[IntegrationScheme] = None) -> BumpField:
    """
    Build phi_{beta,delta,eps,x0}: alpha solves 1/(1-alpha) = 1/(1-p*) + eps and
    c = (delta / (2 N1))^{1/(n-1)} with N1 the cofactor L^p norm at c = 1.

    Raises:
        InvalidExponent: if p < 1 or the alpha equation leaves (0, 1)
    """
    if beta <= 0 or delta <= 0 or eps <= 0:
        raise InvalidExponent("beta, delta and eps must be positive")
    scheme = scheme or default_scheme()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 must be a vector in R^{n}")

    p_star = critical_exponent(p, n)
    alpha = alpha_for_threshold(1.0 / (1.0 - p_star) + eps)
    if not 0.0 < alpha < 1.0:
        raise InvalidExponent(f"alpha={alpha} outside (0, 1) for p={p}, n={n}, eps={eps}")

    unit = BumpField(p=p, n=n, beta=beta, delta=delta, eps=eps, x0=x0, alpha=alpha, c=1.0)
    n1 = _cofactor_lp_norm(unit, p, scheme)
    c = (delta / (2.0 * n1)) ** (1.0 / (n - 1))
    logger.info(f"[OK] bump p={p} n={n} eps={eps}: alpha={alpha:.6f}, N1={n1:.6g}, c={c:.6g}")

    return BumpField(p=p, n=n, beta=beta, delta=delta, eps=eps, x0=x0, alpha=alpha, c=c,
                     unit_lp_norm=n1)


def bump_eval(field_: BumpField, x) -> RadialJet:
    """
    Jet of phi at x (Hessian = c 4/beta^2 Hf_alpha(2(x-x0)/beta)).

    Raises:
        OnSingularSet: if ||2(x-x0)/beta|| is within 1e-12 of 0 or 1
    """
    pts, single = _points(x, field_.n)
    hess = field_.hessian(pts)
    jet = RadialJet(
        value=field_.value(pts),
        gradient=field_.gradient(pts),
        hessian=hess,
        det_hessian=field_.det_hessian(pts),
        cof_hessian=field_.cof_hessian(pts),
    )
    if single:
        jet = RadialJet(float(jet.value[0]), jet.gradient[0], jet.hessian[0],
                        float(jet.det_hessian[0]), jet.cof_hessian[0])
    return jet


# ===== Smoothed cone =====

@dataclass
class SmoothedCone(HessianFamily):
    """sqrt(||x||^2 + eps^2): smooth convex surrogate of the cone ||x||"""
    eps_width: float
    n: int

    def __post_init__(self):
        if self.eps_width <= 0:
            raise ValueError("eps_width must be positive")
        self.center = np.zeros(self.n)
        self.break_radii = ()

    def _s(self, x):
        pts, _ = _points(x, self.n)
        return pts, np.sqrt(np.sum(pts ** 2, axis=1) + self.eps_width ** 2)

    def value(self, x):
        _, s = self._s(x)
        return s

    def gradient(self, x):
        pts, s = self._s(x)
        return pts / s[:, None]

    def hessian(self, x):
        pts, s = self._s(x)
        eye = np.eye(self.n)[None, :, :]
        outer = pts[:, :, None] * pts[:, None, :]
        return eye / s[:, None, None] - outer / s[:, None, None] ** 3

    def det_hessian(self, x):
        _, s = self._s(x)
        return self.eps_width ** 2 * s ** (-(self.n + 2))


def smoothed_cone_eval(sc: SmoothedCone, x) -> RadialJet:
    return sc.jet(x)


def smoothed_cone_sup_gap(eps_width: float) -> float:
    """sup_r |sqrt(r^2 + eps^2) - r| = eps (attained at r = 0)"""
    return float(eps_width)


# ===== Quadratic =====

@dataclass
class QuadraticFn(HessianFamily):
    """1/2 x^T M x with constant Hessian M"""
    M: np.ndarray

    def __post_init__(self):
        self.M = as_symmetric(self.M)
        self.n = self.M.shape[0]
        self.center = None
        self.break_radii = ()

    def value(self, x):
        pts, _ = _points(x, self.n)
        return 0.5 * np.einsum("mi,ij,mj->m", pts, self.M, pts)

    def gradient(self, x):
        pts, _ = _points(x, self.n)
        return pts @ self.M

    def hessian(self, x):
        pts, _ = _points(x, self.n)
        return np.broadcast_to(self.M, (len(pts), self.n, self.n)).copy()


# ===== Polynomial bumps =====

@dataclass
class PolynomialBump:
    """eta(x) = amplitude * ((1 - ||x - center||^2 / radius^2)_+)^power"""
    center: np.ndarray
    radius: float
    power: int
    amplitude: float = 1.0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        if self.power < 1:
            raise ValueError("bump power must be >= 1")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def support_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def _base(self, x):
        pts, _ = _points(x, self.n)
        d = pts - self.center
        u = 1.0 - np.sum(d ** 2, axis=1) / self.radius ** 2
        return d, np.maximum(u, 0.0)

    def value(self, x):
        _, u = self._base(x)
        return self.amplitude * u ** self.power

    def gradient(self, x):
        d, u = self._base(x)
        k = self.power
        coef = -2.0 * k * self.amplitude * u ** (k - 1) / self.radius ** 2
        return coef[:, None] * d

    def hessian(self, x):
        d, u = self._base(x)
        k, r2 = self.power, self.radius ** 2
        eye = np.eye(self.n)[None, :, :]
        outer = d[:, :, None] * d[:, None, :]
        if k >= 2:
            second = 4.0 * k * (k - 1) * u ** (k - 2) / r2 ** 2
        else:
            second = np.zeros_like(u)
        second = np.where(u > 0, second, 0.0)
        first = -2.0 * k * u ** (k - 1) / r2
        first = np.where(u > 0, first, 0.0)
        return self.amplitude * (second[:, None, None] * outer + first[:, None, None] * eye)


# ===== Periodic fields =====

def _as_int_vector(k, n: int, what: str) -> np.ndarray:
    arr = np.asarray(k)
    if arr.shape != (n,) or not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError(f"{what} must be an integer vector in Z^{n}, got {k!r}")
    return arr.astype(float)


@dataclass
class PeriodicField:
    """
    A(x) = cof(S_base + H psi(x)) + sum of laminates, Z^n-periodic, PSD.

    psi(x) = sum a cos(2 pi k.x + theta) over trig_coeffs (k, a[, theta]);
    amplitudes are scaled by amplitude_scale in (0, 1] so the Hessian keeps
    a minimal eigenvalue >= margin on the verification grid.
    Laminates (e, k, amp[, theta]) add amp (1 + cos(2 pi k.x + theta)) e e^T with e . k = 0.
    """
    S_base: np.ndarray
    trig_coeffs: Sequence = ()
    laminates: Sequence = ()
    margin: float = PERIODIC_MARGIN
    margin_grid: Optional[int] = None
    amplitude_scale: float = field(default=1.0, init=False)

    def __post_init__(self):
        self.S_base = as_symmetric(self.S_base)
        self.n = self.S_base.shape[0]
        n = self.n

        terms = []
        for term in self.trig_coeffs:
            k, a = term[0], term[1]
            theta = term[2] if len(term) > 2 else 0.0
            terms.append((_as_int_vector(k, n, "frequency"), float(a), float(theta)))
        self._terms = terms

        lams = []
        for term in self.laminates:
            e, k, amp = term[0], term[1], term[2]
            theta = term[3] if len(term) > 3 else 0.0
            e = _as_int_vector(e, n, "laminate direction")
            k = _as_int_vector(k, n, "laminate frequency")
            if abs(e @ k) > 0:
                raise ValueError("laminate direction must be orthogonal to its frequency")
            if amp < 0:
                raise ValueError("laminate amplitude must be >= 0")
            lams.append((e, k, float(amp), float(theta)))
        self._laminates = lams

        self.center = None
        self.break_radii = ()
        self.amplitude_scale = self._fit_amplitude_scale()

    def _psi_hessian_unscaled(self, pts):
        out = np.zeros((len(pts), self.n, self.n))
        for k, a, theta in self._terms:
            phase = 2.0 * np.pi * (pts @ k) + theta
            out += (-a * (2.0 * np.pi) ** 2 * np.cos(phase))[:, None, None] * np.outer(k, k)[None, :, :]
        return out

    def verification_grid(self) -> np.ndarray:
        """Torus nodes on which the PSD margin is enforced"""
        grid = self.margin_grid or (64 if self.n <= 3 else 24)
        return torus_nodes(self.n, IntegrationScheme(grid_resolution=grid))

    def _fit_amplitude_scale(self) -> float:
        if not self._terms:
            return 1.0
        if float(min_eigenvalue(self.S_base)) <= self.margin:
            raise ConvexityMarginViolated(
                f"S_base has minimal eigenvalue below the margin {self.margin}; no rescaling helps")

        # S_base + t H >= margin Id  <=>  Id + t L^{-1} H L^{-T} >= 0  with  S_base - margin Id = L L^T
        L_inv = np.linalg.inv(np.linalg.cholesky(self.S_base - self.margin * np.eye(self.n)))
        H_psi = self._psi_hessian_unscaled(self.verification_grid())
        reduced = symmetrize(L_inv[None, :, :] @ H_psi @ L_inv.T[None, :, :])
        worst = float(np.max(-min_eigenvalue(reduced)))
        if worst <= 1.0:
            return 1.0
        scale = 1.0 / worst
        logger.info(f"[!] periodic amplitudes rescaled by {scale:.6g} to keep PSD margin {self.margin}")
        return scale

    def hessian(self, x):
        pts, _ = _points(x, self.n)
        return self.S_base[None, :, :] + self.amplitude_scale * self._psi_hessian_unscaled(pts)

    def laminate_part(self, x):
        pts, _ = _points(x, self.n)
        out = np.zeros((len(pts), self.n, self.n))
        for e, k, amp, theta in self._laminates:
            weight = amp * (1.0 + np.cos(2.0 * np.pi * (pts @ k) + theta))
            out += weight[:, None, None] * np.outer(e, e)[None, :, :]
        return out

    def evaluate(self, x):
        pts, _ = _points(x, self.n)
        return cofactor(self.hessian(pts)) + self.laminate_part(pts)

    @property
    def is_constant(self) -> bool:
        return (all(a == 0 for _, a, _ in self._terms)
                and all(amp == 0 for _, _, amp, _ in self._laminates))


def periodic_eval(field_: PeriodicField, x):
    """cof(H(1/2 x^T S x + psi))(x) plus laminates; single point -> (n, n)"""
    pts, single = _points(x, field_.n)
    out = field_.evaluate(pts)
    return out[0] if single else out


def random_periodic_field(n: int, rng: np.random.Generator, modes: int = 3, max_freq: int = 2,
                          amplitude: float = 0.02, laminates: int = 0,
                          laminate_amplitude: float = 0.3) -> PeriodicField:
    """Seeded corpus member: S = Id + small Gram, a few trig modes, optional laminates"""
    G = rng.standard_normal((n, n)) * 0.3
    S = symmetrize(np.eye(n) + G @ G.T)
    trig = []
    for _ in range(modes):
        k = rng.integers(-max_freq, max_freq + 1, size=n)
        if not np.any(k):
            k[0] = 1
        trig.append((k, float(amplitude * rng.uniform(0.2, 1.0)), float(rng.uniform(0, 2 * np.pi))))
    lams = []
    for _ in range(laminates):
        i, j = rng.choice(n, size=2, replace=False)
        e = np.zeros(n, dtype=int)
        e[i] = 1
        k = np.zeros(n, dtype=int)
        k[j] = int(rng.integers(1, max_freq + 1))
        lams.append((e, k, float(laminate_amplitude * rng.uniform(0.5, 1.0)), float(rng.uniform(0, 2 * np.pi))))
    return PeriodicField(S_base=S, trig_coeffs=trig, laminates=lams)


# ===== Diagonal fields =====

@dataclass
class DiagonalField:
    """A = diag(f_1, ..., f_n) with each f_i a compactly supported polynomial bump"""
    profiles: Sequence[PolynomialBump]

    def __post_init__(self):
        self.profiles = tuple(self.profiles)
        self.n = len(self.profiles)
        if any(b.n != self.n for b in self.profiles):
            raise ValueError("every profile must live in R^n with n = number of profiles")

    @property
    def support_box(self) -> Tuple[np.ndarray, np.ndarray]:
        lows = np.min([b.support_box[0] for b in self.profiles], axis=0)
        highs = np.max([b.support_box[1] for b in self.profiles], axis=0)
        return lows, highs

    def entries(self, x):
        pts, _ = _points(x, self.n)
        return np.stack([b.value(pts) for b in self.profiles], axis=1)

    def evaluate(self, x):
        vals = self.entries(x)
        out = np.zeros(vals.shape + (self.n,))
        idx = np.arange(self.n)
        out[:, idx, idx] = vals
        return out

    def divergence(self, x):
        pts, _ = _points(x, self.n)
        return np.stack([b.gradient(pts)[:, i] for i, b in enumerate(self.profiles)], axis=1)

    def scaled(self, lam: float) -> "DiagonalField":
        return DiagonalField([PolynomialBump(b.center, b.radius, b.power, lam * b.amplitude)
                              for b in self.profiles])


def diagonal_eval(field_: DiagonalField, x):
    """(diag(f_1..f_n)(x), (d_1 f_1, ..., d_n f_n)(x)); single point -> unbatched"""
    pts, single = _points(x, field_.n)
    A = field_.evaluate(pts)
    div = field_.divergence(pts)
    return (A[0], div[0]) if single else (A, div)


# ===== Matrix fields =====

@dataclass
class MatrixField:
    """
    x -> A(x) in symmetric n x n matrices on a domain, with optional closed-form
    divergence. center / break_radii describe where the field is singular.
    """
    n: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    domain: Domain
    divergence: Optional[Callable[[np.ndarray], np.ndarray]] = None
    divergence_free: bool = False
    center: Optional[np.ndarray] = None
    break_radii: Tuple[float, ...] = ()
    name: str = "field"

    def __call__(self, x):
        pts, single = _points(x, self.n)
        out = self.evaluate(pts)
        return out[0] if single else out

    def divergence_at(self, x):
        if self.divergence_free:
            pts, _ = _points(x, self.n)
            return np.zeros((len(pts), self.n))
        if self.divergence is None:
            return None
        return self.divergence(x)

    def __add__(self, other: "MatrixField") -> "MatrixField":
        return combine_fields(self, other, 1.0)

    def __sub__(self, other: "MatrixField") -> "MatrixField":
        return combine_fields(self, other, -1.0)


def combine_fields(A: MatrixField, B: MatrixField, sign: float = 1.0) -> MatrixField:
    """A + sign * B on the common domain"""
    if A.n != B.n:
        raise ValueError("fields live in different dimensions")
    if A.domain != B.domain:
        raise ValueError("fields live on different domains")

    if A.divergence_free and B.divergence_free:
        divergence, div_free = None, True
    else:
        da = A.divergence if not A.divergence_free else (lambda x: np.zeros((len(x), A.n)))
        db = B.divergence if not B.divergence_free else (lambda x: np.zeros((len(x), B.n)))
        if da is None or db is None:
            divergence = None
        else:
            divergence = lambda x: da(x) + sign * db(x)
        div_free = False

    center = A.center if A.center is not None else B.center
    return MatrixField(
        n=A.n,
        evaluate=lambda x: A.evaluate(x) + sign * B.evaluate(x),
        domain=A.domain,
        divergence=divergence,
        divergence_free=div_free,
        center=center,
        break_radii=tuple(sorted(set(A.break_radii) | set(B.break_radii))),
        name=f"{A.name}{'+' if sign > 0 else '-'}{B.name}",
    )


def constant_field(M, domain: Domain, name: str = "const") -> MatrixField:
    """x -> M on the domain; divergence-free"""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    return MatrixField(
        n=n,
        evaluate=lambda x: np.broadcast_to(M, (len(x), n, n)).copy(),
        domain=domain,
        divergence_free=True,
        name=name,
    )


def cofactor_field(family: HessianFamily, domain: Domain, name: str = "cof") -> MatrixField:
    """cof(H f) of a C^1 convex family: divergence-free by the Piola identity"""
    return MatrixField(
        n=family.n,
        evaluate=family.cof_hessian,
        domain=domain,
        divergence_free=True,
        center=family.center,
        break_radii=tuple(family.break_radii),
        name=name,
    )


def periodic_matrix_field(field_: PeriodicField) -> MatrixField:
    """Wrap a periodic cofactor field for the torus; divergence-free by construction"""
    return MatrixField(
        n=field_.n,
        evaluate=field_.evaluate,
        domain=Domain.torus(field_.n),
        divergence_free=True,
        name="periodic",
    )


def diagonal_matrix_field(field_: DiagonalField, domain: Optional[Domain] = None) -> MatrixField:
    """Wrap a diagonal field with its closed-form divergence; domain defaults to the support box"""
    if domain is None:
        lo, hi = field_.support_box
        domain = Domain.cube(lo, hi)
    return MatrixField(
        n=field_.n,
        evaluate=field_.evaluate,
        domain=domain,
        divergence=field_.divergence,
        name="diagonal",
    )


if __name__ == "__main__":
    print("=== fields smoke test ===")
    jet = radial_eval(RadialConvexFn(0.5, 2), np.array([0.25, 0.0]))
    ok = abs(jet.det_hessian - 4.5) < 1e-12
    print(f"{'[OK]' if ok else '[X]'} det Hf_0.5 at (0.25, 0) = {jet.det_hessian}")
    sc = smoothed_cone_eval(SmoothedCone(0.5, 2), np.array([0.5, 0.0]))
    print(f"[i] smoothed cone det at r=eps=0.5: {sc.det_hessian}")
