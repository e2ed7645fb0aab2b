# -*- coding: utf-8 -*-
"""
Inequality and Counterexample Verdicts
Critical exponents, Serre's gap on the torus, the field metric, the bump
counterexample verdict, the diagonal-field ratio and the Loomis-Whitney gap
"""

import math
import logging
import concurrent.futures
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from config import get_config
from errors import DivergenceUnavailable, InvalidExponent, NegativeInput
from fields import (
    BumpField, DiagonalField, MatrixField, PeriodicField, RadialConvexFn,
    alpha_for_threshold, cofactor_field, construct_bump, critical_exponent,
    periodic_matrix_field,
)
from matkit import det, frobenius_norm, random_psd
from quadrature import (
    Domain, IntegrationScheme, default_scheme, fit_threshold,
    integrate_cube, integrate_domain, integrate_torus, lp_dyadic,
)
from weakcalc import bump_corpus, max_divergence_residual

logger = logging.getLogger(__name__)

THRESHOLD_REL_TOL = 0.02
TAIL_TOL = 1e-12
MINKOWSKI_TOL = 1e-10
DIVERGENCE_TOL = 1e-5
SERRE_TOL = 1e-8


# ===== Exponents =====

@dataclass
class ExponentData:
    p: float
    n: int
    p_star: float
    gain_exponent: float
    serre_exponent: float
    open_question_pprime: Optional[float] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def exponents(p: float, n: int) -> ExponentData:
    """
    p* = max(0, (p(n-1) - n)/(p(n-1))), gain 1/(1-p*), Serre 1/(n-1),
    and p' with 1/p' = 1/p - 1/n when 1 < p < n.
    """
    p_star = critical_exponent(p, n)
    pprime = None
    if 1 < p < n:
        pprime = 1.0 / (1.0 / p - 1.0 / n)
    return ExponentData(
        p=float(p),
        n=n,
        p_star=p_star,
        gain_exponent=1.0 / (1.0 - p_star),
        serre_exponent=1.0 / (n - 1),
        open_question_pprime=pprime,
    )


# ===== Check records =====

@dataclass
class CheckResult:
    """One measured quantity against its target and tolerance"""
    check: str
    value: float
    target: float
    tolerance: float
    passed: bool
    detail: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        record = {
            "check": self.check,
            "value": _jsonable(self.value),
            "target": _jsonable(self.target),
            "tolerance": _jsonable(self.tolerance),
            "pass": bool(self.passed),
        }
        if self.detail:
            record["detail"] = {k: _jsonable(v) for k, v in self.detail.items()}
        return record


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class Verdict:
    """Sub-results of a counterexample run, each with its tolerance, plus the scheme used"""
    checks: List[CheckResult]
    scheme: dict
    parameters: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)

    @property
    def property_i(self) -> bool:
        return self["property_i"].passed

    @property
    def property_ii(self) -> bool:
        return self["property_ii"].passed

    @property
    def property_iii(self) -> bool:
        return self["property_iii"].passed

    @property
    def minkowski_step(self) -> bool:
        return self["minkowski_step"].passed

    @property
    def divergence_free(self) -> bool:
        return self["divergence_free"].passed

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "parameters": {k: _jsonable(v) for k, v in self.parameters.items()},
            "scheme": self.scheme,
            "results": [c.to_dict() for c in self.checks],
        }


# ===== Serre =====

def serre_gap(field_, scheme: Optional[IntegrationScheme] = None) -> float:
    """
    det(mean A)^{1/(n-1)} - mean det(A)^{1/(n-1)} over the unit torus.
    Non-negative for PSD divergence-free periodic fields.
    """
    scheme = scheme or default_scheme()
    if isinstance(field_, PeriodicField):
        field_ = periodic_matrix_field(field_)
    n = field_.n
    power = 1.0 / (n - 1)

    mean_A = integrate_torus(field_.evaluate, n, scheme)
    mean_root = integrate_torus(lambda x: np.maximum(det(field_.evaluate(x)), 0.0) ** power, n, scheme)
    gap = max(float(det(mean_A)), 0.0) ** power - float(mean_root)
    logger.debug(f"[i] serre gap n={n} grid={scheme.grid_resolution}: {gap:.3e}")
    return gap


# ===== Field metric =====

def _lp_on_domain(g: Callable, p: float, domain: Domain, scheme: IntegrationScheme,
                  breaks: Sequence[float] = ()) -> float:
    total = integrate_domain(lambda x: np.abs(g(x)) ** p, domain, scheme, breaks=breaks)
    return float(max(total, 0.0)) ** (1.0 / p)


def field_distance(A: MatrixField, B: MatrixField, p: float,
                   scheme: Optional[IntegrationScheme] = None) -> float:
    """
    d(A, B) = ||A - B||_{L^p} + ||div(A - B)||_{L^p} on the shared domain (Frobenius / Euclidean pointwise).

    Raises:
        DivergenceUnavailable: if a divergence is needed and a field has none
    """
    if p < 1:
        raise InvalidExponent("p must be >= 1")
    if A.domain != B.domain:
        raise ValueError("fields must share a domain")
    scheme = scheme or default_scheme()
    breaks = tuple(sorted(set(A.break_radii) | set(B.break_radii)))

    matrix_part = _lp_on_domain(lambda x: frobenius_norm(A.evaluate(x) - B.evaluate(x)),
                                p, A.domain, scheme, breaks)

    if A.divergence_free and B.divergence_free:
        return matrix_part

    for F in (A, B):
        if not F.divergence_free and F.divergence is None:
            raise DivergenceUnavailable(f"no divergence for {F.name}")
    div_part = _lp_on_domain(lambda x: np.linalg.norm(A.divergence_at(x) - B.divergence_at(x), axis=1),
                             p, A.domain, scheme, breaks)
    return matrix_part + div_part


# ===== Counterexample verdict =====

def _exterior_samples(rng: np.random.Generator, x0: np.ndarray, beta: float, count: int) -> np.ndarray:
    n = len(x0)
    dirs = rng.standard_normal((count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.5 * beta, 2.0 * beta, size=count)
    return x0 + radii[:, None] * dirs


def _interior_samples(rng: np.random.Generator, x0: np.ndarray, beta: float, count: int) -> np.ndarray:
    n = len(x0)
    dirs = rng.standard_normal((count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = beta * rng.uniform(0.01, 1.0, size=count) ** (1.0 / n)
    return x0 + radii[:, None] * dirs


def check_quadratic_tail(bump: BumpField, points: np.ndarray) -> CheckResult:
    """phi(x) = x^T S x outside B_{beta/2}(x0), relative deviation"""
    quad = np.einsum("mi,ij,mj->m", points, bump.S, points)
    dev = np.abs(bump.value(points) - quad) / np.maximum(1.0, np.abs(quad))
    worst = float(np.max(dev))
    return CheckResult("property_i", worst, 0.0, TAIL_TOL, worst <= TAIL_TOL,
                       {"samples": len(points)})


def check_cofactor_norm(bump: BumpField, scheme: IntegrationScheme) -> CheckResult:
    """
    ||cof(H phi)||_{L^p(B_beta(x0))} <= delta, measured one refinement step beyond
    the scheme that fixed c (which put the norm at delta/2).
    """
    g = lambda x: frobenius_norm(bump.cof_hessian(x))
    report = lp_dyadic(g, bump.p, bump.n, scheme.refined(), center=bump.x0, radius=bump.beta,
                       breaks=bump.break_radii)
    measured = report.lp_norm
    at_construction = bump.c ** (bump.n - 1) * bump.unit_lp_norm
    return CheckResult("property_ii", measured, bump.delta, 0.0, measured <= bump.delta,
                       {"p": bump.p, "construction_norm": at_construction})


def check_blowup_threshold(bump: BumpField, target: float, scheme: IntegrationScheme) -> CheckResult:
    """
    Fitted threshold of det(H phi) = det(cof H phi)^{1/(n-1)} near x0 matches target,
    and the shells of |det|^target do not shrink.
    """
    report = lp_dyadic(bump.det_hessian, 1.0, bump.n, scheme, center=bump.x0, radius=bump.beta,
                       breaks=bump.break_radii)
    fitted = fit_threshold(report, bump.n)
    at_target = lp_dyadic(bump.det_hessian, target, bump.n, scheme, center=bump.x0,
                          radius=bump.beta, breaks=bump.break_radii)
    close = abs(fitted - target) <= THRESHOLD_REL_TOL * target
    return CheckResult(
        "property_iii", fitted, target, THRESHOLD_REL_TOL, close and not at_target.converged,
        {"fit_r2": report.fit_r2, "tail_ratio_at_target": at_target.tail_ratio,
         "converged_at_target": at_target.converged},
    )


def check_minkowski_step(bump: BumpField, A_bar: np.ndarray, points: np.ndarray) -> CheckResult:
    """det(A_bar + M_bar(x)) >= det(M_bar(x)) with M_bar = cof(H phi)"""
    M = bump.cof_hessian(points)
    det_m = det(M)
    slack = det(A_bar[None, :, :] + M) - det_m + MINKOWSKI_TOL * (1.0 + np.abs(det_m))
    worst = float(np.min(slack))
    return CheckResult("minkowski_step", worst, 0.0, MINKOWSKI_TOL, worst >= 0.0,
                       {"samples": len(points)})


def check_divergence_free(bump: BumpField, corpus, scheme: IntegrationScheme) -> CheckResult:
    A = cofactor_field(bump, Domain.ball(bump.x0, bump.beta), name="cof(H bump)")
    worst = max_divergence_residual(A, corpus, scheme)
    return CheckResult("divergence_free", worst, 0.0, DIVERGENCE_TOL, worst <= DIVERGENCE_TOL,
                       {"bumps": len(corpus)})


def counterexample_verdict(p: float, n: int, eps: float, beta: float = 1.0, delta: float = 0.1,
                           x0=None, scheme: Optional[IntegrationScheme] = None,
                           seed: Optional[int] = None) -> Verdict:
    """
    Build the bump phi and check its tail, cofactor norm, blow-up threshold,
    the Minkowski step against a random PSD baseline, and weak divergence-freeness.

    Raises:
        InvalidExponent: for p < 1 or an alpha outside (0, 1)
    """
    scheme = scheme or default_scheme()
    seed = get_config("seed", 0) if seed is None else seed
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)

    ex = exponents(p, n)
    target = ex.gain_exponent + eps
    bump = construct_bump(p, n, beta, delta, eps, x0, scheme)

    # All random inputs drawn up front so the check order cannot change them
    rng = np.random.default_rng(seed)
    exterior = _exterior_samples(rng, x0, beta, 20)
    interior = _interior_samples(rng, x0, beta, 100)
    A_bar = random_psd(rng, n)
    corpus = bump_corpus(rng, x0, 0.5 * beta, 10)

    tasks = [
        lambda: check_quadratic_tail(bump, exterior),
        lambda: check_cofactor_norm(bump, scheme),
        lambda: check_blowup_threshold(bump, target, scheme),
        lambda: check_minkowski_step(bump, A_bar, interior),
        lambda: check_divergence_free(bump, corpus, scheme),
    ]
    with concurrent.futures.ThreadPoolExecutor(max_workers=len(tasks)) as executor:
        checks = list(executor.map(lambda task: task(), tasks))

    for c in checks:
        logger.info(f"{'[OK]' if c.passed else '[X]'} {c.check}: value={c.value:.6g} target={c.target:.6g}")

    return Verdict(
        checks=checks,
        scheme=scheme.to_dict(),
        parameters={"p": p, "n": n, "eps": eps, "beta": beta, "delta": delta, "x0": x0,
                    "seed": seed, "alpha": bump.alpha, "c": bump.c, "p_star": ex.p_star},
    )


def hessian_counterexample_verdict(p: float, n: int, eps: float,
                                   scheme: Optional[IntegrationScheme] = None) -> Verdict:
    """
    Hessian version: alpha with 1/(1-alpha) = p/n + eps, so Hf_alpha is in L^p
    near 0 while det(Hf_alpha) fails L^{p/n + eps}.

    Raises:
        InvalidExponent: if p/n + eps <= 1 (alpha would leave (0, 1))
    """
    scheme = scheme or default_scheme()
    target = p / n + eps
    if p < 1 or eps <= 0 or target <= 1.0:
        raise InvalidExponent(f"need p >= 1, eps > 0 and p/n + eps > 1 (got {target})")
    alpha = alpha_for_threshold(target)
    fn = RadialConvexFn(alpha, n)

    hess_report = lp_dyadic(lambda x: frobenius_norm(fn.hessian(x)), p, n, scheme, breaks=fn.break_radii)
    det_report = lp_dyadic(fn.det_hessian, 1.0, n, scheme, breaks=fn.break_radii)
    fitted = fit_threshold(det_report, n)
    at_target = lp_dyadic(fn.det_hessian, target, n, scheme, breaks=fn.break_radii)

    checks = [
        CheckResult("hessian_lp", hess_report.tail_ratio, 1.0, 0.0, hess_report.converged,
                    {"lp_norm": hess_report.lp_norm}),
        CheckResult("det_threshold", fitted, target, THRESHOLD_REL_TOL,
                    abs(fitted - target) <= THRESHOLD_REL_TOL * target and not at_target.converged,
                    {"tail_ratio_at_target": at_target.tail_ratio}),
    ]
    return Verdict(checks=checks, scheme=scheme.to_dict(),
                   parameters={"p": p, "n": n, "eps": eps, "alpha": alpha})


# ===== Diagonal fields =====

def diagonal_report(field_: DiagonalField, p: float, scheme: Optional[IntegrationScheme] = None) -> dict:
    """
    lhs = || |det A|^{1/(n-1)} ||_{L^p}, div_norm = ||div A||_{L^p},
    ratio = lhs / div_norm^{n/(n-1)} (0 for the zero field).
    """
    if p < 1:
        raise InvalidExponent("p must be >= 1")
    scheme = scheme or default_scheme()
    n = field_.n
    lo, hi = field_.support_box
    domain = Domain.cube(lo, hi)

    lhs = _lp_on_domain(lambda x: np.abs(np.prod(field_.entries(x), axis=1)) ** (1.0 / (n - 1)),
                        p, domain, scheme)
    div_norm = _lp_on_domain(lambda x: np.linalg.norm(field_.divergence(x), axis=1), p, domain, scheme)

    denom = div_norm ** (n / (n - 1))
    if denom == 0:
        ratio = 0.0 if lhs == 0 else math.inf
    else:
        ratio = lhs / denom
    return {"lhs": lhs, "div_norm": div_norm, "ratio": ratio}


def loomis_whitney_gap(g_list: Sequence[Callable], scheme: Optional[IntegrationScheme] = None,
                       lower: float = 0.0, upper: float = 1.0) -> float:
    """
    prod ||g_i||_{L^1}^{1/(n-1)} - integral of prod g_i(x without x_i)^{1/(n-1)}
    on the cube [lower, upper]^n. Each g_i takes (m, n-1) points.

    Raises:
        NegativeInput: if some g_i < -1e-12 at a node
    """
    scheme = scheme or default_scheme()
    n = len(g_list)
    if n < 2:
        raise ValueError("need at least two functions")
    power = 1.0 / (n - 1)

    def sampled(i, pts):
        vals = np.asarray(g_list[i](pts), dtype=float)
        if np.any(vals < -1e-12):
            raise NegativeInput(f"g_{i + 1} takes negative values")
        return np.clip(vals, 0.0, None)

    face_lo, face_hi = [lower] * (n - 1), [upper] * (n - 1)
    norms = [float(integrate_cube(lambda pts, i=i: sampled(i, pts), face_lo, face_hi, scheme))
             for i in range(n)]
    rhs = float(np.prod([v ** power for v in norms]))

    def product(x):
        out = np.ones(len(x))
        for i in range(n):
            out *= sampled(i, np.delete(x, i, axis=1)) ** power
        return out

    lhs = float(integrate_cube(product, [lower] * n, [upper] * n, scheme))
    return rhs - lhs


if __name__ == "__main__":
    print("=== inequalities smoke test ===")
    ex = exponents(2.0, 3)
    print(f"[i] p=2, n=3: p*={ex.p_star}, gain={ex.gain_exponent}, p'={ex.open_question_pprime}")
    gap = serre_gap(PeriodicField(np.eye(2)))
    print(f"{'[OK]' if abs(gap) < 1e-12 else '[X]'} serre gap of the identity field: {gap}")
