"""Discrete NLS on Z^d truncated to the hypercube I_n^d = [-n, n]^d.

Nearest-neighbour Laplacian (stride 1) with zero Dirichlet data outside the
cube; time stepping by Cayley half-steps around a truncated-exponential phase.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import ConfigError, NumericFailure
from .propagate import SOLVE_TOL, _exp_k_coeffs


@dataclass(frozen=True, eq=False)
class LatticeState:
    n: int
    d: int
    values: np.ndarray
    s: float = 0.0
    A: Optional[float] = None  # declared l2_s bound, checked when given

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        shape = (2 * self.n + 1,) * self.d
        if vals.shape != shape:
            vals = vals.reshape(shape)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.A is not None and weighted_norm(self.n, self.d, vals, self.s) > self.A * (1 + 1e-12):
            raise ConfigError(f"l2_s norm exceeds the declared bound {self.A}")

    def sites(self) -> np.ndarray:
        k = np.arange(-self.n, self.n + 1)
        g = np.meshgrid(*([k] * self.d), indexing="ij")
        return np.stack([x.ravel() for x in g], axis=-1)

    def with_values(self, values) -> "LatticeState":
        return LatticeState(self.n, self.d, values, self.s, None)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values.ravel()))


def weighted_norm(n, d, values, s) -> float:
    """(sum_k <k>^{2s} |v_k|^2)^{1/2} over I_n^d."""
    k = np.arange(-n, n + 1, dtype=float)
    k2 = np.zeros((2 * n + 1,) * d)
    for ax in range(d):
        shape = [1] * d
        shape[ax] = -1
        k2 = k2 + (k ** 2).reshape(shape)
    return float(np.sqrt(np.sum((1 + k2) ** s * np.abs(values) ** 2)))


def from_sampler(sampler, n, d, s, A=None) -> LatticeState:
    k = np.arange(-n, n + 1, dtype=float)
    g = np.meshgrid(*([k] * d), indexing="ij")
    pts = np.stack([x.ravel() for x in g], axis=-1)
    vals = np.asarray(sampler(pts), dtype=complex).reshape((2 * n + 1,) * d)
    return LatticeState(n, d, vals, s, A)


def _lap(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    for ax in range(v.ndim):
        lo = [slice(None)] * v.ndim
        hi = [slice(None)] * v.ndim
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        out[tuple(lo)] += v[tuple(hi)]
        out[tuple(hi)] += v[tuple(lo)]
    return out - 2 * v.ndim * v


def lattice_laplacian(v: LatticeState) -> LatticeState:
    """(Delta v)(k) = sum_i v(k + e_i) + v(k - e_i) - 2 v(k), zero outside I_n^d."""
    return v.with_values(_lap(v.values))


def laplacian_matrix(n: int, d: int):
    m = 2 * n + 1
    L1 = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="csr")
    I = sp.identity(m, format="csr")
    L = sp.csr_matrix((m ** d, m ** d))
    for ax in range(d):
        mats = [I] * d
        mats[ax] = L1
        term = mats[0]
        for M_ in mats[1:]:
            term = sp.kron(term, M_, format="csr")
        L = L + term
    return L.tocsr()


def choose_lattice_radius(A: float, s: float, eps_share: float, C: float = 1.0, kmax: int = 40) -> int:
    """Smallest n = 2^k with C A <n>^{-s/4} <= eps_share."""
    if not (A > 0 and s > 0 and eps_share > 0 and C > 0):
        raise ValueError("A, s, eps_share and C must be positive")
    for k in range(kmax + 1):
        n = 2 ** k
        if C * A * (1.0 + n * n) ** (-s / 8) <= eps_share:
            return n
    raise ValueError("lattice radius ladder exhausted")


# -- time stepping -------------------------------------------------------------------

class OpCounter(Counter):
    """Floating-point work actually issued by the stepper, by kind."""

    def total(self) -> int:
        return int(sum(self.values()))


@dataclass
class LatticeTrajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    ops: OpCounter = field(default_factory=OpCounter)
    max_drift: float = 0.0
    phase_ranges: list = field(default_factory=list)


class _LatticeCayley:
    def __init__(self, n, d, tau, onsite=None):
        a = 0.5 * tau
        H = -laplacian_matrix(n, d)
        if onsite is not None:
            H = H + sp.diags(np.broadcast_to(np.asarray(onsite, dtype=float), ((2 * n + 1) ** d,)))
        self.A = (sp.identity(H.shape[0], format="csc") + 1j * a * H.tocsc()).tocsc()
        self.lu = spla.splu(self.A, permc_spec="NATURAL" if d == 1 else "COLAMD")
        self.factor_nnz = int(self.lu.L.nnz + self.lu.U.nnz)
        self.matvec_nnz = int(self.A.nnz)
        self.tau = tau

    def apply(self, v, ops: OpCounter):
        if self.tau == 0:
            return v
        # one refinement sweep always, so the work does not depend on v
        y = self.lu.solve(v)
        res = v - self.A @ y
        y = y + self.lu.solve(res)
        res = v - self.A @ y
        ops["solve"] += 4 * self.factor_nnz
        ops["residual"] += 4 * self.matvec_nnz + 2 * v.size
        rel = np.linalg.norm(res) / max(np.linalg.norm(v), 1e-300)
        ops["norm"] += 4 * v.size
        if rel > SOLVE_TOL:
            raise NumericFailure(f"lattice Cayley residual {rel:.3e}")
        out = 2.0 * y - v
        ops["axpy"] += v.size
        return out


def _phase(v, c, half_pow, K, cc, sc, ops: OpCounter):
    """v * exp_K(c |v|^(sigma-1)) by Horner in x^2 with fixed K."""
    amp2 = v.real ** 2 + v.imag ** 2
    x = c * amp2 ** half_pow
    ops["phase_arg"] += v.size * (3 + half_pow)
    x2 = x * x
    cr = np.full(v.shape, cc[K])
    si = np.full(v.shape, sc[K])
    for j in range(K - 1, -1, -1):
        cr = cr * x2 + cc[j]
        si = si * x2 + sc[j]
    ops["horner"] += v.size * (1 + 4 * K)
    m = cr + 1j * (x * si)
    ops["multiply"] += v.size * 7
    return v * m, float(np.max(np.abs(x))) if x.size else 0.0


def lattice_strang(v0: LatticeState, nu: int, sigma: int, tau: float, steps: int, K: int,
                   stride: int = 0, onsite=None) -> LatticeTrajectory:
    """Cayley(tau/2) o [v -> v exp_K(-tau nu |v|^(sigma-1))] o Cayley(tau/2), repeated.

    The operation count depends on (n, d, steps, K) only.  ``onsite`` adds a
    real diagonal term to -Delta (used for the conjugation symmetry check).
    """
    if nu not in (1, -1):
        raise ValueError("nu must be +1 or -1")
    if sigma not in (3, 5):
        raise ValueError("sigma must be 3 or 5")
    if not tau > 0:
        raise ValueError("tau must be positive")
    solver = _LatticeCayley(v0.n, v0.d, tau / 2, onsite)
    cc, sc = _exp_k_coeffs(K)
    half_pow = (sigma - 1) // 2
    c = -tau * nu
    v = v0.values.ravel().copy()
    tr = LatticeTrajectory()
    tr.times.append(0.0)
    tr.snapshots.append(v.reshape(v0.values.shape).copy())
    tr.norms.append(float(np.linalg.norm(v)))
    for k in range(steps):
        n_in = np.linalg.norm(v)
        v = solver.apply(v, tr.ops)
        v, r = _phase(v, c, half_pow, K, cc, sc, tr.ops)
        tr.phase_ranges.append(r)
        v = solver.apply(v, tr.ops)
        nrm = float(np.linalg.norm(v))
        if not math.isfinite(nrm):
            raise NumericFailure(f"non-finite lattice state at step {k + 1}")
        if n_in > 0:
            tr.max_drift = max(tr.max_drift, abs(nrm / n_in - 1.0))
        tr.norms.append(nrm)
        if (stride and (k + 1) % stride == 0) or k + 1 == steps:
            tr.times.append((k + 1) * tau)
            tr.snapshots.append(v.reshape(v0.values.shape).copy())
    return tr


def restrict(values: np.ndarray, n_from: int, n_to: int) -> np.ndarray:
    """Sub-array on I_{n_to}^d of an array on I_{n_from}^d."""
    off = n_from - n_to
    sl = tuple(slice(off, off + 2 * n_to + 1) for _ in range(values.ndim))
    return values[sl]


@dataclass
class TruncationStudy:
    radii: list
    errors: list
    monotone: bool
    decay_exponent: Optional[float]  # slope of log error against log <n>
    predicted_exponent: float


def truncation_study(v0: LatticeState, radii, nu: int = 1, sigma: int = 3, tau: float = 0.05,
                     steps: int = 20, K: int = 8) -> TruncationStudy:
    """Distance on I_{n-1} between the n-truncated solution and the run on v0's lattice."""
    radii = sorted(int(r) for r in radii)
    if radii[-1] >= v0.n:
        raise ValueError("reference lattice must be larger than every radius")
    ref = lattice_strang(v0, nu, sigma, tau, steps, K).snapshots[-1]
    errs = []
    for n in radii:
        sub = LatticeState(n, v0.d, restrict(v0.values, v0.n, n), v0.s)
        out = lattice_strang(sub, nu, sigma, tau, steps, K).snapshots[-1]
        diff = restrict(out, n, n - 1) - restrict(ref, v0.n, n - 1)
        errs.append(float(np.linalg.norm(diff.ravel())))
    mono = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(errs, errs[1:]))
    slope = None
    pos = [(n, e) for n, e in zip(radii, errs) if e > 1e-14]
    if len(pos) >= 2:
        x = np.log([math.sqrt(1 + n * n) for n, _ in pos])
        y = np.log([e for _, e in pos])
        slope = float(-np.polyfit(x, y, 1)[0])
    return TruncationStudy(radii, errs, mono, slope, v0.s / 4)
