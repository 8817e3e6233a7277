"""Momentum grids, dispersion relations, cutoff functions and sampled kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import integrate

BOSON = "boson"
FERMION = "fermion"
CHI_SHAPES = ("indicator", "smooth-bump")
F_SHAPES = ("ball-indicator", "normalized-bump")

# support radius of every chi shape offered here
R_CHI = 1.0

Coefficient = Union[complex, float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class DispersionParams:
    m_b: float = 1.0
    m_f: float = 1.0

    def __post_init__(self):
        if not (self.m_b > 0 and self.m_f > 0):
            raise ValueError(f"masses must be positive, got m_b={self.m_b}, m_f={self.m_f}")

    def mass(self, kind: str) -> float:
        if kind == BOSON:
            return self.m_b
        if kind == FERMION:
            return self.m_f
        raise ValueError(f"unknown particle kind {kind!r}")


def dispersion(kind: str, q, params: DispersionParams):
    """Relativistic energy sqrt(|q|^2 + m^2); `q` has the momentum on its last axis."""
    m = params.mass(kind)
    q = np.asarray(q, dtype=float)
    if q.ndim == 0:
        q = q[None]
    out = np.sqrt(np.sum(q * q, axis=-1) + m * m)
    return float(out) if out.ndim == 0 else out


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _bump(r2):
    r2 = np.asarray(r2, dtype=float)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@lru_cache(maxsize=None)
def _bump_normalization(d: int) -> float:
    radial, _ = integrate.quad(lambda r: r ** (d - 1) * math.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
                               epsabs=0.0, epsrel=1e-13, limit=200)
    return 1.0 / (sphere_area(d) * radial)


def profile_f(v, shape: str, d: int):
    """Unit-mass profile f supported in the closed unit ball; `v` has vectors on its last axis."""
    v = np.asarray(v, dtype=float)
    r2 = np.sum(v * v, axis=-1)
    if shape == "ball-indicator":
        return np.where(r2 <= 1.0, 1.0 / unit_ball_volume(d), 0.0)
    if shape == "normalized-bump":
        return _bump_normalization(d) * _bump(r2)
    raise ValueError(f"unknown f shape {shape!r}")


def profile_f_sup(shape: str, d: int) -> float:
    if shape == "ball-indicator":
        return 1.0 / unit_ball_volume(d)
    return _bump_normalization(d) * math.exp(-1.0)


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def chi(r, shape: str):
    """UV profile: equal to 1 on [0, 1/2], vanishing beyond r = 1."""
    r = np.asarray(r, dtype=float)
    if shape == "indicator":
        return np.where(r <= 1.0, 1.0, 0.0)
    if shape == "smooth-bump":
        a = _psi(1.0 - r)
        b = _psi(r - 0.5)
        denom = a + b
        return np.divide(a, denom, out=np.zeros_like(r), where=denom > 0)
    raise ValueError(f"unknown chi shape {shape!r}")


@dataclass(frozen=True)
class CutoffSpec:
    Lambda: float
    chi_shape: str = "indicator"
    n: int = 1
    f_shape: str = "ball-indicator"

    def __post_init__(self):
        if not self.Lambda > 0:
            raise ValueError("Lambda must be positive")
        if self.chi_shape not in CHI_SHAPES:
            raise ValueError(f"chi_shape must be one of {CHI_SHAPES}")
        if self.f_shape not in F_SHAPES:
            raise ValueError(f"f_shape must be one of {F_SHAPES}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    def with_lambda(self, Lambda: float) -> "CutoffSpec":
        return CutoffSpec(Lambda, self.chi_shape, self.n, self.f_shape)


def spatial_cutoff(x, spec: CutoffSpec, d: int):
    """g(x) = n^d f(n x)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    out = spec.n ** d * profile_f(spec.n * x, spec.f_shape, d)
    return float(out) if np.ndim(out) == 0 else out


def _coefficient_sup(h) -> float | None:
    if callable(h):
        return None
    return abs(complex(h))


@dataclass(frozen=True)
class KernelSpec:
    """Kernel data: exponent p, bounded coefficients h1/h2 and the coupling scale.

    `h1`/`h2` are numbers or vectorized callables `h(k, q)`; callables must come
    with an explicit bound `h1_sup`/`h2_sup`.
    """
    p: float = 0.5
    h1: Coefficient = 1.0
    h2: Coefficient = 1.0
    coupling: float = 1.0
    h1_sup: float | None = None
    h2_sup: float | None = None

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("p must be nonnegative")
        for name in ("h1", "h2"):
            h = getattr(self, name)
            given = getattr(self, name + "_sup")
            implied = _coefficient_sup(h)
            if implied is None and given is None:
                raise ValueError(f"{name} is a callable; supply {name}_sup")
            if implied is not None and given is None:
                object.__setattr__(self, name + "_sup", implied)

    def h(self, sharp: int):
        return self.h1 if sharp == 1 else self.h2

    def h_sup(self, sharp: int) -> float:
        return self.h1_sup if sharp == 1 else self.h2_sup

    def is_constant(self) -> bool:
        return not (callable(self.h1) or callable(self.h2))


def _eval_h(h, k, q):
    if callable(h):
        return np.asarray(h(k, q), dtype=complex)
    return np.full(np.broadcast_shapes(k.shape[:-1], q.shape[:-1]), complex(h))


def kernel_value(sharp: int, k, q, kspec: KernelSpec, cspec: CutoffSpec, params: DispersionParams):
    """lambda * h(k,q) g(k -+ q) chi(|k|/Lambda) chi(|q|/Lambda) / omega_a(q)^p.

    sharp=1 uses g(k - q), sharp=2 uses g(k + q). Broadcasts over leading axes.
    """
    if sharp not in (1, 2):
        raise ValueError("sharp must be 1 or 2")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if k.shape[-1] != q.shape[-1]:
        raise ValueError("k and q must share a dimension")
    d = k.shape[-1]
    shifted = k - q if sharp == 1 else k + q
    g = spatial_cutoff(shifted, cspec, d)
    cut = (chi(np.linalg.norm(k, axis=-1) / cspec.Lambda, cspec.chi_shape)
           * chi(np.linalg.norm(q, axis=-1) / cspec.Lambda, cspec.chi_shape))
    omega = dispersion(BOSON, q, params)
    val = kspec.coupling * _eval_h(kspec.h(sharp), k, q) * g * cut / np.power(omega, kspec.p)
    return complex(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Midpoint cells of a cube in momentum space, clipped to the ball of radius Q_max."""
    d: int
    centers: np.ndarray
    w: float
    Q_max: float

    @property
    def size(self) -> int:
        return len(self.centers)

    def energies(self, kind: str, params: DispersionParams) -> np.ndarray:
        return np.atleast_1d(dispersion(kind, self.centers, params))


def build_grid(d: int, Q_max: float, cells_per_axis: int) -> ModeGrid:
    """Uniform midpoint grid on [-Q_max, Q_max]^d in lexicographic order.

    Cells whose center falls outside the ball of radius Q_max are dropped; for
    d = 1 nothing is dropped.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if cells_per_axis < 1 or not Q_max > 0:
        raise ValueError("need cells_per_axis >= 1 and Q_max > 0")
    h = 2.0 * Q_max / cells_per_axis
    axis = -Q_max + h * (np.arange(cells_per_axis) + 0.5)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    keep = np.linalg.norm(centers, axis=-1) <= Q_max * (1 + 1e-12)
    centers = np.ascontiguousarray(centers[keep])
    centers.setflags(write=False)
    return ModeGrid(d=d, centers=centers, w=h ** d, Q_max=float(Q_max))


@dataclass(frozen=True, eq=False)
class Kernel:
    """A kernel sampled on (fermion cell i, boson cell j) pairs of one grid."""
    values: np.ndarray
    grid: ModeGrid

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.grid.size, self.grid.size):
            raise ValueError(f"kernel shape {vals.shape} does not match grid size {self.grid.size}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def w(self) -> float:
        return self.grid.w

    def scaled(self, c) -> "Kernel":
        return Kernel(c * self.values, self.grid)

    def conj(self) -> "Kernel":
        return Kernel(self.values.conj(), self.grid)

    def __add__(self, other: "Kernel") -> "Kernel":
        return Kernel(self.values + other.values, self.grid)

    def __sub__(self, other: "Kernel") -> "Kernel":
        return Kernel(self.values - other.values, self.grid)

    def norm(self) -> float:
        """L2 norm of the step function, sqrt(sum w^2 |F|^2)."""
        return float(self.w * np.sqrt(np.sum(np.abs(self.values) ** 2)))


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    values1: np.ndarray
    values2: np.ndarray
    grid: ModeGrid
    bound1: float = math.inf
    bound2: float = math.inf
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        G1 = Kernel(self.values1, self.grid)
        G2 = Kernel(self.values2, self.grid)
        object.__setattr__(self, "values1", G1.values)
        object.__setattr__(self, "values2", G2.values)
        slack = 1 + 1e-12
        if np.max(np.abs(G1.values), initial=0.0) > self.bound1 * slack:
            raise ValueError("G1 exceeds its bounded-kernel estimate")
        if np.max(np.abs(G2.values), initial=0.0) > self.bound2 * slack:
            raise ValueError("G2 exceeds its bounded-kernel estimate")

    @property
    def w(self) -> float:
        return self.grid.w

    @property
    def G1(self) -> Kernel:
        return Kernel(self.values1, self.grid)

    @property
    def G2(self) -> Kernel:
        return Kernel(self.values2, self.grid)

    def side(self, sharp: int) -> Kernel:
        return self.G1 if sharp == 1 else self.G2

    def scaled(self, c: float) -> "KernelMatrix":
        return KernelMatrix(c * self.values1, c * self.values2, self.grid,
                            abs(c) * self.bound1, abs(c) * self.bound2, dict(self.meta))

    @classmethod
    def from_values(cls, values1, values2, grid: ModeGrid) -> "KernelMatrix":
        return cls(np.asarray(values1, dtype=complex), np.asarray(values2, dtype=complex), grid)


def kernel_matrix(kspec: KernelSpec, cspec: CutoffSpec, params: DispersionParams,
                  grid: ModeGrid) -> KernelMatrix:
    """Sample both kernels on all (k_i, q_j) pairs of the grid."""
    k = grid.centers[:, None, :]
    q = grid.centers[None, :, :]
    v1 = kernel_value(1, k, q, kspec, cspec, params)
    v2 = kernel_value(2, k, q, kspec, cspec, params)
    g_max = cspec.n ** grid.d * profile_f_sup(cspec.f_shape, grid.d)
    scale = abs(kspec.coupling) * g_max / params.m_b ** kspec.p
    meta = {"p": kspec.p, "Lambda": cspec.Lambda, "n": cspec.n, "chi": cspec.chi_shape,
            "f": cspec.f_shape, "coupling": kspec.coupling}
    return KernelMatrix(np.reshape(v1, (grid.size, grid.size)), np.reshape(v2, (grid.size, grid.size)),
                        grid, kspec.h1_sup * scale, kspec.h2_sup * scale, meta)
