"""Shared value types: problem descriptions, cell-constant grid functions, norms."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class SchroCertError(Exception):
    """Base class for package errors."""


class ConfigError(SchroCertError):
    pass


class SamplingError(SchroCertError):
    pass


class BudgetInfeasible(SchroCertError):
    def __init__(self, message, share=None):
        super().__init__(message)
        self.share = share


class NumericFailure(SchroCertError):
    pass


class Family(enum.Enum):
    LINEAR = "linear"
    DEFOCUSING_NLS = "nls"
    LATTICE_NLS = "lattice"


@dataclass(frozen=True)
class ProblemSpec:
    family: Family
    dimension: int = 1
    horizon: float = 1.0
    mu: float = 1.0
    sigma: Optional[int] = None
    nu: int = 1

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("dimension must be positive")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.mu > 0:
            raise ConfigError("mu must be positive")
        if self.nu not in (1, -1):
            raise ConfigError("nu must be +1 or -1")
        if self.family is not Family.LINEAR and self.sigma not in (3, 5):
            raise ConfigError("sigma must be 3 or 5 for nonlinear families")
        if self.family is Family.DEFOCUSING_NLS:
            if self.nu != 1:
                raise ConfigError("continuum NLS is defocusing only (nu = +1)")
            if self.dimension != 1:
                raise ConfigError("continuum NLS is restricted to d = 1")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex values constant on the cells of [-R, R]^d with side h = 1/m.

    ``values`` has shape (n,)*d with n = 2 R m; C order gives the lexicographic
    flattening.  Cell j along an axis is [-R + j h, -R + (j+1) h).
    """

    box_radius: float
    cells_per_unit: int
    dimension: int
    values: np.ndarray

    def __post_init__(self):
        n = self.box_radius * 2 * self.cells_per_unit
        if self.cells_per_unit < 1 or abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError("2 R m must be a positive integer")
        n = int(round(n))
        vals = np.array(self.values, dtype=complex)
        if vals.ndim == 1 and self.dimension > 1 and vals.size == n ** self.dimension:
            vals = vals.reshape((n,) * self.dimension)
        if vals.shape != (n,) * self.dimension:
            raise ValueError(f"values shape {vals.shape} != {(n,) * self.dimension}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def h(self) -> float:
        return 1.0 / self.cells_per_unit

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def cell_count(self) -> int:
        return self.values.size

    def midpoints(self) -> np.ndarray:
        """1d array of cell midpoints along any axis."""
        return -self.box_radius + (np.arange(self.n) + 0.5) * self.h

    def mesh(self) -> np.ndarray:
        """Midpoints as an array of shape (cells, d), lexicographic order."""
        return box_midpoints(self.box_radius, self.cells_per_unit, self.dimension)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.box_radius, self.cells_per_unit, self.dimension, values)

    def same_grid(self, other: "GridFunction") -> bool:
        return (self.box_radius == other.box_radius
                and self.cells_per_unit == other.cells_per_unit
                and self.dimension == other.dimension)


def box_midpoints(R, m, d) -> np.ndarray:
    n = int(round(2 * R * m))
    x = -R + (np.arange(n) + 0.5) / m
    grids = np.meshgrid(*([x] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def zeros(R, m, d) -> GridFunction:
    n = int(round(2 * R * m))
    return GridFunction(R, m, d, np.zeros((n,) * d, dtype=complex))


def grid_l2_norm(f: GridFunction) -> float:
    return float(f.h ** (f.dimension / 2) * np.linalg.norm(f.values.ravel()))


def inner(f: GridFunction, g: GridFunction) -> complex:
    """Discrete L2 inner product <f, g>, antilinear in f."""
    return complex(f.h ** f.dimension * np.vdot(f.values.ravel(), g.values.ravel()))


def _outside_measure(R, m, d, R0):
    """Measure of each cell lying outside the cube [-R0, R0]^d."""
    h = 1.0 / m
    n = int(round(2 * R * m))
    lo = -R + np.arange(n) * h
    inside_1d = np.clip(np.minimum(lo + h, R0) - np.maximum(lo, -R0), 0.0, h)
    inside = inside_1d
    for _ in range(d - 1):
        inside = np.multiply.outer(inside, inside_1d)
    return h ** d - inside


def weighted_tail_norm(f: GridFunction, eta: float, R0: float) -> float:
    """L2 norm of f on the complement of the cube [-R0, R0]^d.

    Exact for cell-constant functions (partial cells are weighted by the
    measure they have outside the cube).  The weight exponent ``eta`` only
    enters the matching bound, see :func:`tail_bound`.
    """
    if not 0 < R0 < f.box_radius:
        raise ValueError(f"R0={R0} must lie in (0, {f.box_radius})")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    w = _outside_measure(f.box_radius, f.cells_per_unit, f.dimension, R0)
    return float(np.sqrt(np.sum(w * np.abs(f.values) ** 2)))


def tail_bound(h_eta_norm: float, eta: float, R0: float) -> float:
    """Bound ||phi 1_{|x| > R0}|| <= ||phi||_{H_eta} (1 + R0^2)^(-eta/2) <= ||phi||_{H_eta} R0^-eta."""
    return h_eta_norm * (1.0 + R0 * R0) ** (-eta / 2)


@dataclass(frozen=True)
class NormReport:
    l2: float
    h_rho_eta: dict
    h1h: float
    h2h: float
    surrogate: bool = True  # continuum norms are replaced by grid surrogates


# -- certificates for inputs -------------------------------------------------

Sampler = Callable[[np.ndarray], np.ndarray]


def quantize(values: np.ndarray, M: int) -> np.ndarray:
    """Round to the dyadic grid 2^-M (identity once M reaches double precision)."""
    if M >= 52:
        return values
    s = 2.0 ** M
    if np.iscomplexobj(values):
        return np.round(values.real * s) / s + 1j * (np.round(values.imag * s) / s)
    return np.round(values * s) / s


@dataclass(frozen=True)
class InitialState:
    """Point-samplable initial datum with its regularity certificates.

    sampler maps an array of points (n, d) to n complex values.
    sobolev_bound is (space, C) with space in {"H2+eps_2", "H3+eps_2", "S^eps"}.
    clbbv(R) bounds sup norm and total variation on [-R, R]^d.
    grad_bound bounds the mixed partial derivatives up to order one per axis
    (used for per-cell variation, optional).
    h_eta is (eta, B) with ||<x>^eta phi||^2 + ||phi||^2 <= B^2.
    """

    sampler: Sampler
    sobolev_bound: tuple
    eps_reg: float
    clbbv: Callable[[float], float]
    dimension: int = 1
    grad_bound: Optional[float] = None
    h_eta: Optional[tuple] = None
    l2_bound: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        space, C = self.sobolev_bound
        if space not in ("H2+eps_2", "H3+eps_2", "S^eps"):
            raise ConfigError(f"unknown regularity class {space!r}")
        if not C >= 0 or not self.eps_reg > 0:
            raise ConfigError("certificate constants must be positive")
        w = []
        for r in (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0):
            try:
                w.append(self.clbbv(r))
            except ConfigError:  # tables may stop short of large radii
                break
        if any(b < a for a, b in zip(w, w[1:])):
            raise ConfigError("clbbv map must be non-decreasing in R")

    @property
    def norm_bound(self) -> float:
        """Certified bound on the L2 norm."""
        return self.l2_bound if self.l2_bound is not None else self.sobolev_bound[1]

    def sample(self, points: np.ndarray, M: int = 52) -> np.ndarray:
        vals = np.asarray(self.sampler(np.atleast_2d(points)), dtype=complex)
        return quantize(vals, M)


@dataclass(frozen=True)
class ControlFunction:
    """Piecewise W^{1,1} control u on [0, T]."""

    fn: Callable[[float], float]
    breakpoints: tuple
    w11_budget: float
    sup: float

    def __call__(self, t):
        return self.fn(t)

    def piece_norms(self, samples=4097) -> list:
        out = []
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            t = np.linspace(a, b, samples)
            u = np.array([self.fn(s) for s in t], dtype=float)
            l1 = np.trapezoid(np.abs(u), t)
            out.append(float(l1 + np.sum(np.abs(np.diff(u)))))
        return out

    def check(self, tol=1e-9):
        norms = self.piece_norms()
        if sum(norms) > self.w11_budget * (1 + tol):
            raise ConfigError(f"W11 budget {self.w11_budget} below piece sum {sum(norms)}")


def constant_control(value: float, T: float) -> ControlFunction:
    return ControlFunction(lambda t: value, (0.0, T), abs(value) * T, abs(value))


@dataclass(frozen=True)
class RegularPart:
    """Potential part with sampler(points, t) and W^{k,inf} control g(R)."""

    sampler: Callable
    smoothness: Optional[Callable[[float], float]]  # None: no W^{1,inf} control (rough)
    variation: Optional[Callable[[float], float]] = None  # R -> sup + variation on the box


@dataclass(frozen=True)
class SingularPart:
    sampler: Callable
    singularities: np.ndarray
    p: float
    blowup_control: Callable  # (eps, R) -> (delta, K)
    gap: float = 1.0
    variation: Optional[Callable] = None  # (delta, R) -> sup + variation of the excised part


@dataclass(frozen=True)
class PotentialModel:
    w_sing: Optional[SingularPart] = None
    w_reg: Optional[RegularPart] = None
    v_con: Optional[RegularPart] = None
    u: Optional[ControlFunction] = None
    global_bound: float = 0.0
    w_eps_p_control: Optional[Callable] = None  # r -> bound on the local W^{eps,p} norm
    eps_p: tuple = (0.5, 2.0)

    def __post_init__(self):
        if self.w_sing is not None and len(self.w_sing.singularities) > 1:
            pts = np.atleast_2d(self.w_sing.singularities)
            diff = pts[:, None, :] - pts[None, :, :]
            dist = np.sqrt(np.sum(diff ** 2, axis=-1))
            dist[np.diag_indices_from(dist)] = np.inf
            if dist.min() < self.w_sing.gap:
                raise ConfigError("singularities closer than the declared gap")
        if self.u is not None:
            self.u.check()

    @property
    def has_phase(self) -> bool:
        return self.v_con is not None and self.u is not None and self.u.sup > 0

    def static(self, points) -> np.ndarray:
        """W_reg + W_sing at points (no time dependence)."""
        out = np.zeros(len(points))
        if self.w_reg is not None:
            out = out + np.real(self.w_reg.sampler(points))
        if self.w_sing is not None:
            out = out + np.real(self.w_sing.sampler(points))
        return out
