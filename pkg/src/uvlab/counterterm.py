"""Second-order counterterm, kernel weight integrals, K-constants and exponent thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .modegrid import (BOSON, FERMION, R_CHI, CutoffSpec, DispersionParams, Kernel, KernelMatrix,
                       KernelSpec, chi, profile_f, sphere_area)

QUAD_METHODS = ("tensor-midpoint", "adaptive-radial", "monte-carlo")

# weight W(omega_b(k), omega_a(q)) multiplying |G(k,q)|^2
Weight = Callable[[np.ndarray, np.ndarray], np.ndarray]


def e2_discrete(km: KernelMatrix, params: DispersionParams) -> float:
    """-sum w^2 |G2|^2 / (omega_b(k_i) + omega_a(q_j))."""
    wb = km.grid.energies(FERMION, params)
    wa = km.grid.energies(BOSON, params)
    return -float(km.w ** 2 * np.sum(np.abs(km.values2) ** 2 / (wb[:, None] + wa[None, :])))


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "adaptive-radial"
    resolution: int = 400      # outer cells per axis (tensor-midpoint)
    inner: int = 32            # inner Gauss order, or inner cells per axis for tensor-midpoint
    samples: int = 2_000_000   # monte-carlo budget
    seed: int = 0
    error_target: float = 1e-8
    limit: int = 400           # adaptive subdivision budget

    def __post_init__(self):
        if self.method not in QUAD_METHODS:
            raise ValueError(f"method must be one of {QUAD_METHODS}")
        if not self.error_target > 0:
            raise ValueError("error_target must be positive")
        if min(self.resolution, self.inner, self.samples, self.limit) < 1:
            raise ValueError("resolution controls must be positive")


class QuadratureResult(NamedTuple):
    value: float
    error: float
    converged: bool


def _integrand(q, v, sharp, weight, kspec, cspec, params):
    """|G(k,q)|^2 W after the substitution v = n(k -+ q); q, v carry vectors on the last axis."""
    d = q.shape[-1]
    n = cspec.n
    k = q + v / n if sharp == 1 else v / n - q
    fv = profile_f(v, cspec.f_shape, d)
    kk = np.linalg.norm(k, axis=-1)
    qq = np.linalg.norm(q, axis=-1)
    cut = chi(kk / cspec.Lambda, cspec.chi_shape) * chi(qq / cspec.Lambda, cspec.chi_shape)
    wa = np.sqrt(qq * qq + params.m_b ** 2)
    wb = np.sqrt(kk * kk + params.m_f ** 2)
    h = kspec.h(sharp)
    habs2 = np.abs(np.asarray(h(k, q), dtype=complex)) ** 2 if callable(h) else abs(complex(h)) ** 2
    return (kspec.coupling ** 2 * n ** d * fv ** 2 * habs2 * cut ** 2
            / wa ** (2 * kspec.p) * weight(wb, wa))


def _midpoints(lo, hi, cells):
    h = (hi - lo) / cells
    return lo + h * (np.arange(cells) + 0.5), h


def _tensor_midpoint(sharp, weight, kspec, cspec, params, d, nq, nv):
    R = cspec.Lambda * R_CHI
    qa, hq = _midpoints(-R, R, nq)
    va, hv = _midpoints(-1.0, 1.0, nv)
    vs = np.stack([m.ravel() for m in np.meshgrid(*([va] * d), indexing="ij")], axis=-1)
    qs = np.stack([m.ravel() for m in np.meshgrid(*([qa] * d), indexing="ij")], axis=-1)
    chunk = max(1, 2_000_000 // len(vs))
    partial = []
    for start in range(0, len(qs), chunk):
        block = qs[start:start + chunk]
        vals = _integrand(block[:, None, :], vs[None, :, :], sharp, weight, kspec, cspec, params)
        partial.append(vals.sum())
    return math.fsum(partial) * hq ** d * hv ** d


def _gauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _radial_1d(sharp, weight, kspec, cspec, params, order, limit):
    R = cspec.Lambda * R_CHI
    n = cspec.n
    x, wts = _gauss(order)

    def inner(q):
        if sharp == 2:
            lo, hi = n * (q - R), n * (q + R)
        else:
            lo, hi = n * (-R - q), n * (R - q)
        lo, hi = max(lo, -1.0), min(hi, 1.0)
        if hi <= lo:
            return 0.0
        v = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        vals = _integrand(np.full((order, 1), q), v[:, None], sharp, weight, kspec, cspec, params)
        return 0.5 * (hi - lo) * float(np.dot(wts, vals))

    pts = sorted({t for t in (0.0, R / 2, R - 1.0 / n, -R / 2, -(R - 1.0 / n)) if -R < t < R})
    val, err = integrate.quad(inner, -R, R, points=pts, limit=limit, epsabs=0.0, epsrel=1e-12)
    return val, err


def _radial_nd(weight, kspec, cspec, params, d, order, limit):
    """Isotropic kernels: q = r e, v = (s, angle theta to e); the v-ball is clipped so |k| <= R.

    For r > R - 1/n the clipping starts at s* = n(R - r); beyond s* the angular
    range shrinks like a square root, which the substitution s = s* + (1 - s*)u^2
    smooths out.
    """
    R = cspec.Lambda * R_CHI
    n = cspec.n
    x, wts = _gauss(order)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * wts

    def shell(r, s, ws):
        if r == 0.0:
            t0 = np.full(s.shape, -np.inf)
        else:
            t0 = (s ** 2 / n ** 2 + r * r - R * R) / (2.0 * r * s / n)
        theta_max = np.where(t0 > 1.0, 0.0, np.arccos(np.clip(t0, -1.0, 1.0)))
        theta = theta_max[:, None] * u[None, :]
        jac = theta_max[:, None] * wu[None, :]
        measure = 2.0 * np.pi * np.sin(theta) if d == 3 else np.full_like(theta, 2.0)
        # v along (cos theta, sin theta, 0...), q along e1; k = v/n - q
        v = np.zeros(theta.shape + (d,))
        v[..., 0] = s[:, None] * np.cos(theta)
        v[..., 1] = s[:, None] * np.sin(theta)
        q = np.zeros(theta.shape + (d,))
        q[..., 0] = r
        vals = _integrand(q, v, 2, weight, kspec, cspec, params)
        return float(np.sum((ws * s ** (d - 1))[:, None] * jac * measure * vals))

    def inner(r):
        s_star = min(max(n * (R - r), 0.0), 1.0)
        total = 0.0
        if s_star > 0.0:
            total += shell(r, s_star * u, s_star * wu)
        if s_star < 1.0:
            span = 1.0 - s_star
            total += shell(r, s_star + span * u * u, 2.0 * span * u * wu)
        return sphere_area(d) * r ** (d - 1) * total

    pts = sorted({t for t in (R / 2, R - 1.0 / n) if 0 < t < R})
    val, err = integrate.quad(inner, 0.0, R, points=pts, limit=limit, epsabs=0.0, epsrel=1e-12)
    return val, err


def _monte_carlo(sharp, weight, kspec, cspec, params, d, qspec):
    R = cspec.Lambda * R_CHI
    rng = np.random.default_rng(qspec.seed)
    volume = (2.0 * R) ** d * 2.0 ** d
    batch = min(200_000, qspec.samples)
    total = total2 = 0.0
    count = 0
    err = math.inf
    while count < qspec.samples:
        q = rng.uniform(-R, R, size=(batch, d))
        v = rng.uniform(-1.0, 1.0, size=(batch, d))
        vals = volume * _integrand(q, v, sharp, weight, kspec, cspec, params)
        total += float(vals.sum())
        total2 += float(np.dot(vals, vals))
        count += batch
        mean = total / count
        err = math.sqrt(max(total2 / count - mean * mean, 0.0) / count)
        if err <= qspec.error_target * max(1.0, abs(mean)):
            break
    return total / count, err


def kernel_integral(sharp: int, weight: Weight, kspec: KernelSpec, cspec: CutoffSpec,
                    params: DispersionParams, d: int, qspec: QuadratureSpec | None = None) -> QuadratureResult:
    """Continuum integral of |G_sharp(k,q)|^2 W(omega_b(k), omega_a(q)) over R^d x R^d."""
    qspec = qspec or QuadratureSpec()
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    h = kspec.h(sharp)
    if not callable(h) and complex(h) == 0 or kspec.coupling == 0:
        return QuadratureResult(0.0, 0.0, True)
    if qspec.method == "tensor-midpoint":
        coarse = _tensor_midpoint(sharp, weight, kspec, cspec, params, d, qspec.resolution, qspec.inner)
        fine = _tensor_midpoint(sharp, weight, kspec, cspec, params, d, 2 * qspec.resolution, 2 * qspec.inner)
        err = abs(fine - coarse)
        return QuadratureResult(fine, err, err <= qspec.error_target * max(1.0, abs(fine)))
    if qspec.method == "monte-carlo":
        val, err = _monte_carlo(sharp, weight, kspec, cspec, params, d, qspec)
        return QuadratureResult(val, err, err <= qspec.error_target * max(1.0, abs(val)))
    if d == 1:
        lo, e_lo = _radial_1d(sharp, weight, kspec, cspec, params, qspec.inner, qspec.limit)
        hi, e_hi = _radial_1d(sharp, weight, kspec, cspec, params, 2 * qspec.inner, qspec.limit)
    else:
        if callable(h):
            raise ValueError("adaptive-radial in d > 1 needs a constant coefficient h")
        # constant h and radial chi make the two kernel signs give equal integrals
        lo, e_lo = _radial_nd(weight, kspec, cspec, params, d, qspec.inner, qspec.limit)
        hi, e_hi = _radial_nd(weight, kspec, cspec, params, d, 2 * qspec.inner, qspec.limit)
    err = abs(hi - lo) + e_hi
    return QuadratureResult(hi, err, err <= qspec.error_target * max(1.0, abs(hi)))


def e2_quadrature(kspec: KernelSpec, cspec: CutoffSpec, params: DispersionParams, d: int,
                  qspec: QuadratureSpec | None = None) -> QuadratureResult:
    """Continuum counterterm -int |G2|^2 / (omega_b + omega_a)."""
    res = kernel_integral(2, lambda wb, wa: 1.0 / (wb + wa), kspec, cspec, params, d, qspec)
    return QuadratureResult(-res.value, res.error, res.converged)


def _check_z(z):
    if complex(z).real >= -1:
        raise ValueError("K-constants need Re z < -1")
    return abs(complex(z).real)


def _energies(F: Kernel, params: DispersionParams):
    return F.grid.energies(FERMION, params), F.grid.energies(BOSON, params)


def k1_weight(z, beta: float) -> Weight:
    x = _check_z(z)
    return lambda wb, wa: 1.0 / ((wb + x) ** (2 * beta - 1) * wb)


def a_weight(z, beta: float) -> Weight:
    x = _check_z(z)
    return lambda wb, wa: 1.0 / (wa * (wa + x) ** beta)


def k3_weight(z, gamma: float) -> Weight:
    x = _check_z(z)
    return lambda wb, wa: 1.0 / (wb * (wb + x) ** (1.0 / 3.0 + 2.0 * gamma / 3.0))


def _weighted_sum(F: Kernel, weight: Weight, params: DispersionParams) -> float:
    wb, wa = _energies(F, params)
    W = weight(wb[:, None], wa[None, :])
    return float(F.w ** 2 * np.sum(np.abs(F.values) ** 2 * W))


def k1_constant(z, beta: float, F: Kernel, params: DispersionParams) -> float:
    if not 0.5 <= beta <= 1.0:
        raise ValueError("beta must lie in [1/2, 1]")
    return math.sqrt(_weighted_sum(F, k1_weight(z, beta), params))


def a_factor(z, beta: float, F: Kernel, params: DispersionParams) -> float:
    return math.sqrt(_weighted_sum(F, a_weight(z, beta), params))


def k2_constant(z, beta: float, F: Kernel, G: Kernel, params: DispersionParams) -> float:
    if not 0.0 <= beta <= 2.0:
        raise ValueError("beta must lie in [0, 2]")
    return a_factor(z, beta, F, params) * a_factor(z, beta, G, params)


def k3_constant(z, gamma: float, F1: Kernel, F2: Kernel, F3: Kernel, params: DispersionParams) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    weight = k3_weight(z, gamma)
    out = 1.0
    for F in (F1, F2, F3):
        out *= math.sqrt(_weighted_sum(F, weight, params))
    return out


def k1_continuum(z, beta: float, sharp: int, kspec: KernelSpec, cspec: CutoffSpec,
                 params: DispersionParams, d: int, qspec: QuadratureSpec | None = None) -> float:
    """K1 of the continuum kernel G_sharp, via the same quadrature engine as the counterterm."""
    if not 0.5 <= beta <= 1.0:
        raise ValueError("beta must lie in [1/2, 1]")
    return math.sqrt(kernel_integral(sharp, k1_weight(z, beta), kspec, cspec, params, d, qspec).value)


@dataclass(frozen=True)
class ThresholdReport:
    d: int
    p: Fraction
    beta_min_K1: Fraction
    beta_min_K2: Fraction
    beta_min_K3: Fraction
    scheme_feasible: bool


# exponents at which the fixed resolvent split uses each constant
SPLIT_BETAS = (Fraction(3, 4), Fraction(1, 2), Fraction(1, 4))


def thresholds(d: int, p) -> ThresholdReport:
    """Smallest exponents keeping K1, K2, K3 bounded in the cutoff, in exact arithmetic."""
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    p = Fraction(p) if not isinstance(p, str) else Fraction(p)
    if p < 0:
        raise ValueError("p must be nonnegative")
    b1 = Fraction(d, 2) - p
    b2 = d - 2 * p - 1
    b3 = Fraction(3 * d, 2) - 3 * p - 2
    feasible = all(split > need for split, need in zip(SPLIT_BETAS, (b1, b2, b3)))
    return ThresholdReport(d, p, b1, b2, b3, feasible)


def log_fit(lambdas, values) -> tuple[float, float, float]:
    """Least-squares fit values ~ a + b log(Lambda); returns (a, b, R^2)."""
    x = np.log(np.asarray(lambdas, dtype=float))
    y = np.asarray(values, dtype=float)
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def power_fit(lambdas, values) -> tuple[float, float]:
    """Fit |values| ~ c Lambda^s on a log-log scale; returns (c, s)."""
    x = np.log(np.asarray(lambdas, dtype=float))
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    s, logc = np.polyfit(x, y, 1)
    return float(math.exp(logc)), float(s)
