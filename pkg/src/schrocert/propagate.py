"""Crank-Nicolson (Cayley) steps, truncated exponentials and Strang splitting.

All steppers act on cell values of a GridFunction.  The Hamiltonian is
H = -mu^2 lap_h + V_Q with lap_h the stride-2h square of the symmetric
difference and zero ghost cells.
"""
from __future__ import annotations

import math
import platform
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import llvmlite.ir as ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

from .core import GridFunction, NumericFailure, grid_l2_norm

SOLVE_TOL = 1e-12
_EMPTY_C = np.zeros(0, dtype=np.complex128)


# -- truncated exponential -----------------------------------------------------

def _exp_k_coeffs(K):
    cc = np.array([(-1) ** n / math.factorial(2 * n) for n in range(K + 1)])
    sc = np.array([(-1) ** n / math.factorial(2 * n + 1) for n in range(K + 1)])
    return cc, sc


def exp_k(x, K: int):
    """sum_{n<=K} (-1)^n x^{2n}/(2n)! + i (-1)^n x^{2n+1}/(2n+1)!, approximating e^{ix}."""
    if K < 0:
        raise ValueError("K must be non-negative")
    x = np.asarray(x, dtype=float)
    cc, sc = _exp_k_coeffs(K)
    x2 = x * x
    c = np.full_like(x, cc[K])
    s = np.full_like(x, sc[K])
    for n in range(K - 1, -1, -1):
        c = c * x2 + cc[n]
        s = s * x2 + sc[n]
    out = c + 1j * (x * s)
    return out if out.ndim else complex(out)


def _log_stirling_term(r, N):
    """log of (e r / N)^N / sqrt(2 pi N), an upper bound for log(r^N / N!)."""
    return N * (1.0 + math.log(r) - math.log(N)) - 0.5 * math.log(2 * math.pi * N)


def remainder_bound(K: int, r: float, stirling: bool = True) -> float:
    """Bound on |e^{ix} - exp_K(x)| over |x| <= r."""
    if r == 0:
        return 0.0
    if stirling:
        return math.exp(_log_stirling_term(r, 2 * K + 2)) + math.exp(_log_stirling_term(r, 2 * K + 3))
    return (math.exp((2 * K + 2) * math.log(r) - math.lgamma(2 * K + 3))
            + math.exp((2 * K + 3) * math.log(r) - math.lgamma(2 * K + 4)))


def choose_k(eps: float, r: float, kmax: int = 10000) -> int:
    """Smallest K whose Stirling-form remainder bound on [-r, r] is <= eps."""
    if not (eps > 0 and r > 0):
        raise ValueError("eps and r must be positive")
    for K in range(kmax + 1):
        if remainder_bound(K, r) <= eps:
            return K
    raise ValueError(f"no K <= {kmax} reaches eps={eps} on r={r}")


# -- numba kernels -----------------------------------------------------------
# Gaussian tails drive the sweeps into subnormal numbers, which are two to
# three times slower on x86.  The kernels switch on flush-to-zero for their
# own duration and restore the caller's MXCSR afterwards.

_X86 = platform.machine().lower() in ("x86_64", "amd64", "i686", "x86")
_FTZ_DAZ = 0x8040


def _mxcsr_call(builder, name, ptr):
    fnty = ir.FunctionType(ir.VoidType(), [ir.PointerType(ir.IntType(8))])
    fn = cgutils.get_or_insert_function(builder.module, fnty, "llvm.x86.sse." + name)
    builder.call(fn, [builder.bitcast(ptr, ir.PointerType(ir.IntType(8)))])


if _X86:
    @intrinsic
    def _get_mxcsr(typingctx):
        def codegen(context, builder, sig, args):
            ptr = cgutils.alloca_once(builder, ir.IntType(32))
            _mxcsr_call(builder, "stmxcsr", ptr)
            return builder.load(ptr)
        return types.uint32(), codegen

    @intrinsic
    def _set_mxcsr(typingctx, val):
        def codegen(context, builder, sig, args):
            ptr = cgutils.alloca_once(builder, ir.IntType(32))
            builder.store(args[0], ptr)
            _mxcsr_call(builder, "ldmxcsr", ptr)
            return context.get_dummy_value()
        return types.void(types.uint32), codegen
else:
    @njit
    def _get_mxcsr():
        return np.uint32(0)

    @njit
    def _set_mxcsr(val):
        pass


@njit(cache=True)
def _thomas_factor(diag, off):
    n = diag.size
    cp = np.zeros(n, dtype=np.complex128)
    inv = np.empty(n, dtype=np.complex128)
    for j in range(n):
        den = diag[j]
        if j >= 2:
            den = den - off * cp[j - 2]
        inv[j] = 1.0 / den
        if j + 2 < n:
            cp[j] = off * inv[j]
    return cp, inv


@njit(cache=True, fastmath={"contract"})
def _cayley_inplace(psi, cpr, cpi, ir_, ii_, o, work, mult, use_mult):
    """psi <- 2 A^{-1} psi - psi, optionally followed by psi <- mult * psi.

    A = 1 + i a H is tridiagonal on the even and odd chains (off-diagonal i*o
    at distance two).  Written in real arithmetic with the previous chain
    values carried in registers; the sweeps are latency bound.
    Returns the squared norms before and after the Cayley map.
    """
    old = _get_mxcsr()
    _set_mxcsr(np.uint32(old | _FTZ_DAZ))
    n = psi.size
    pr = psi.view(np.float64)
    wr = work.view(np.float64)
    s_in = 0.0
    a0r = 0.0
    a0i = 0.0
    a1r = 0.0
    a1i = 0.0
    for j in range(n):
        dr = pr[2 * j]
        di = pr[2 * j + 1]
        s_in += dr * dr + di * di
        dr += o * a0i
        di -= o * a0r
        r = ir_[j]
        i = ii_[j]
        xr = dr * r - di * i
        xi = dr * i + di * r
        wr[2 * j] = xr
        wr[2 * j + 1] = xi
        a0r, a0i, a1r, a1i = a1r, a1i, xr, xi
    s_out = 0.0
    b1r = 0.0
    b1i = 0.0
    b2r = 0.0
    b2i = 0.0
    for j in range(n - 1, -1, -1):
        cr = cpr[j]
        ci = cpi[j]
        xr = wr[2 * j] - (cr * b2r - ci * b2i)
        xi = wr[2 * j + 1] - (cr * b2i + ci * b2r)
        yr = 2.0 * xr - pr[2 * j]
        yi = 2.0 * xi - pr[2 * j + 1]
        s_out += yr * yr + yi * yi
        if use_mult:
            m = mult[j]
            t = yr * m.real - yi * m.imag
            yi = yr * m.imag + yi * m.real
            yr = t
        pr[2 * j] = yr
        pr[2 * j + 1] = yi
        b2r, b2i, b1r, b1i = b1r, b1i, xr, xi
    _set_mxcsr(old)
    return s_in, s_out


@njit(cache=True)
def _phase_inplace(psi, vcon, s, c_nl, nl_half_power, cc, sc):
    """psi_j <- exp_K(a_j) psi_j with a_j = s vcon_j + c_nl |psi_j|^(2 nl_half_power).

    Returns max |a_j|, the phase range actually used.
    """
    old = _get_mxcsr()
    _set_mxcsr(np.uint32(old | _FTZ_DAZ))
    K = cc.size - 1
    amax = 0.0
    use_v = vcon.size == psi.size
    for j in range(psi.size):
        a = 0.0
        if use_v:
            a = s * vcon[j]
        if c_nl != 0.0:
            z = psi[j]
            m2 = z.real * z.real + z.imag * z.imag
            a += c_nl * m2 ** nl_half_power
        if abs(a) > amax:
            amax = abs(a)
        x2 = a * a
        c = cc[K]
        si = sc[K]
        for k in range(K - 1, -1, -1):
            c = c * x2 + cc[k]
            si = si * x2 + sc[k]
        psi[j] = psi[j] * complex(c, a * si)
    _set_mxcsr(old)
    return amax


@njit(cache=True)
def _phase_multiplier(vcon, s, cc, sc):
    K = cc.size - 1
    out = np.empty(vcon.size, dtype=np.complex128)
    amax = 0.0
    for j in range(vcon.size):
        a = s * vcon[j]
        if abs(a) > amax:
            amax = abs(a)
        x2 = a * a
        c = cc[K]
        si = sc[K]
        for k in range(K - 1, -1, -1):
            c = c * x2 + cc[k]
            si = si * x2 + sc[k]
        out[j] = complex(c, a * si)
    return out, amax


# -- Cayley solver ----------------------------------------------------------------

def _lap_1d_sparse(n, h):
    D = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [1, -1], shape=(n, n)) / (2 * h)
    return (D @ D).tocsr()


def hamiltonian_matrix(n: int, h: float, d: int, mu: float = 1.0, potential=None):
    """Sparse H = -mu^2 lap_h + diag(V) on an n^d grid (C order)."""
    L1 = _lap_1d_sparse(n, h)
    I = sp.identity(n, format="csr")
    L = sp.csr_matrix((n ** d, n ** d))
    for ax in range(d):
        mats = [I] * d
        mats[ax] = L1
        term = mats[0]
        for M_ in mats[1:]:
            term = sp.kron(term, M_, format="csr")
        L = L + term
    H = -mu * mu * L
    if potential is not None:
        H = H + sp.diags(np.asarray(potential, dtype=float).ravel())
    return H.tocsr()


class CayleySolver:
    """Prefactored Cayley transform (1 + i tau H/2)^{-1}(1 - i tau H/2)."""

    def __init__(self, n: int, h: float, d: int, tau: float, mu: float = 1.0, potential=None):
        self.n, self.h, self.d, self.tau, self.mu = n, h, d, tau, mu
        a = 0.5 * tau
        if potential is None:
            V = np.zeros(n ** d)
        else:
            V = np.ascontiguousarray(np.asarray(potential, dtype=float).ravel())
        self.max_drift = 0.0
        if d == 1:
            c = np.full(n, 2.0)
            c[0] = c[-1] = 1.0
            if n == 1:
                c[0] = 0.0
            beta = mu * mu / (4 * h * h)
            diag = 1.0 + 1j * a * (beta * c + V)
            self.o = -a * beta  # off-diagonal is i*o
            cp, inv = _thomas_factor(diag.astype(np.complex128), complex(0.0, self.o))
            self.cpr, self.cpi = cp.real.copy(), cp.imag.copy()
            self.ir, self.ii = inv.real.copy(), inv.imag.copy()
            self.work = np.empty(n, dtype=np.complex128)
        else:
            H = hamiltonian_matrix(n, h, d, mu, V)
            self.A = (sp.identity(n ** d, format="csc") + 1j * a * H.tocsc()).tocsc()
            self.lu = spla.splu(self.A)

    def apply_inplace(self, psi: np.ndarray, mult: Optional[np.ndarray] = None):
        """Advance flat complex array psi in place; returns (|in|^2, |out|^2) sums.

        If mult is given, psi is multiplied by it after the Cayley map (the
        returned norms refer to the Cayley map alone).
        """
        if self.tau == 0:
            s = float(np.vdot(psi, psi).real)
            if mult is not None:
                psi *= mult
            return s, s
        if self.d == 1:
            use = mult is not None
            s_in, s_out = _cayley_inplace(psi, self.cpr, self.cpi, self.ir, self.ii, self.o,
                                          self.work, mult if use else _EMPTY_C, use)
        else:
            b = psi.copy()
            y = self.lu.solve(b)
            for _ in range(3):
                res = b - self.A @ y
                rel = np.linalg.norm(res) / max(np.linalg.norm(b), 1e-300)
                if rel <= SOLVE_TOL:
                    break
                y = y + self.lu.solve(res)
            else:
                raise NumericFailure(f"Cayley solve residual {rel:.3e} above {SOLVE_TOL}")
            s_in = float(np.vdot(b, b).real)
            psi[:] = 2.0 * y - b
            s_out = float(np.vdot(psi, psi).real)
            if mult is not None:
                psi *= mult
        if s_in > 0:
            drift = abs(math.sqrt(s_out / s_in) - 1.0)
            self.max_drift = max(self.max_drift, drift)
        return s_in, s_out


def cayley_step(psi: GridFunction, tau: float, potential: Optional[GridFunction] = None,
                mu: float = 1.0) -> GridFunction:
    """One Crank-Nicolson step (1 + i tau H/2) psi' = (1 - i tau H/2) psi."""
    V = None
    if potential is not None:
        if not potential.same_grid(psi):
            raise ValueError("potential and state must share the grid")
        V = potential.values.real
    solver = CayleySolver(psi.n, psi.h, psi.dimension, tau, mu, V)
    v = np.ascontiguousarray(psi.values.ravel().copy())
    solver.apply_inplace(v)
    return psi.with_values(v.reshape(psi.values.shape))


# -- splitting schemes -----------------------------------------------------------

@dataclass(frozen=True)
class SplitScheme:
    kind: str  # "linear" or "nls"
    tau: float
    K: int
    mu: float = 1.0
    sigma: Optional[int] = None
    nu: int = 1
    phase_range: Optional[float] = None  # r certified by K
    phase_tol: Optional[float] = None  # per-step tolerance used to recompute K

    def __post_init__(self):
        if self.kind not in ("linear", "nls"):
            raise ValueError("kind must be 'linear' or 'nls'")
        if self.kind == "nls" and self.sigma not in (3, 5):
            raise ValueError("sigma must be 3 or 5")


@dataclass(frozen=True)
class DiscretePotential:
    """V_Q, (V_con)_Q and u for the splitting schemes (all on the state's grid)."""

    static: Optional[np.ndarray] = None
    vcon: Optional[np.ndarray] = None
    u: Optional[Callable[[float], float]] = None


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    h1_norms: list = field(default_factory=list)
    phase_ranges: list = field(default_factory=list)
    k_history: list = field(default_factory=list)
    events: list = field(default_factory=list)
    cayley_drift: float = 0.0
    exp_error_bound: float = 0.0
    certified_range: float = math.inf
    grid: Optional[tuple] = None

    def final(self) -> GridFunction:
        R, m, d = self.grid
        return GridFunction(R, m, d, self.snapshots[-1])


def _certify_range(traj, scheme, k, K, cc, sc, r):
    """Raise K when the phase argument leaves the range certified for it."""
    if scheme.phase_range is None or r <= traj.certified_range:
        return K, cc, sc
    tol = scheme.phase_tol or 1e-12
    newK = max(K, choose_k(tol, 1.25 * r))
    traj.events.append((k, "phase range exceeded", r, K, newK))
    traj.certified_range = 1.25 * r
    if newK != K:
        cc, sc = _exp_k_coeffs(newK)
    return newK, cc, sc


def _run(state: GridFunction, scheme: SplitScheme, pot: Optional[DiscretePotential], steps: int,
         stride: int, t0: float, h1_stride: int = 0):
    from .fdm import discrete_sobolev_norms

    shape = state.values.shape
    pot = pot or DiscretePotential()
    solver = CayleySolver(state.n, state.h, state.dimension, scheme.tau / 2, scheme.mu, pot.static)
    psi = np.ascontiguousarray(state.values.ravel().copy())
    vcon = (np.ascontiguousarray(np.asarray(pot.vcon, dtype=float).ravel())
            if pot.vcon is not None and pot.u is not None else np.zeros(0))
    nls = scheme.kind == "nls"
    c_nl = -scheme.tau * scheme.nu if nls else 0.0
    half_pow = float((scheme.sigma - 1) // 2) if nls else 1.0
    K = scheme.K
    cc, sc = _exp_k_coeffs(K)
    has_phase = vcon.size > 0 or nls
    dv = state.h ** (state.dimension / 2)
    traj = Trajectory(grid=(state.box_radius, state.cells_per_unit, state.dimension))
    traj.certified_range = scheme.phase_range if scheme.phase_range is not None else math.inf
    traj.times.append(t0)
    traj.snapshots.append(psi.reshape(shape).copy())
    traj.norms.append(dv * float(np.linalg.norm(psi)))
    traj.k_history.append(K)
    vmax = float(np.max(np.abs(vcon))) if vcon.size else 0.0
    if nls and h1_stride:
        traj.h1_norms.append(discrete_sobolev_norms(state, check=False)[0])
    cached_s, mult, mult_amax = None, None, 0.0
    for k in range(steps):
        t = t0 + k * scheme.tau
        if not has_phase:
            solver.apply_inplace(psi)
        elif not nls:
            s = -scheme.tau * pot.u(t)
            if s != cached_s:
                # the multiplier only changes with u(t_k)
                K, cc, sc = _certify_range(traj, scheme, k, K, cc, sc, abs(s) * vmax)
                mult, mult_amax = _phase_multiplier(vcon, s, cc, sc)
                cached_s = s
            solver.apply_inplace(psi, mult)
            traj.phase_ranges.append(mult_amax)
            traj.exp_error_bound += remainder_bound(K, mult_amax)
        else:
            solver.apply_inplace(psi)
            s = -scheme.tau * pot.u(t) if vcon.size else 0.0
            amp2 = float(np.max(psi.real ** 2 + psi.imag ** 2))
            r = abs(s) * vmax + scheme.tau * amp2 ** half_pow
            K, cc, sc = _certify_range(traj, scheme, k, K, cc, sc, r)
            amax = _phase_inplace(psi, vcon, s, c_nl, half_pow, cc, sc)
            traj.phase_ranges.append(amax)
            traj.exp_error_bound += remainder_bound(K, amax)
        _, s_out = solver.apply_inplace(psi)
        nrm = dv * math.sqrt(s_out)
        if not math.isfinite(nrm):
            raise NumericFailure(f"non-finite state at step {k + 1}")
        traj.norms.append(nrm)
        traj.k_history.append(K)
        last = k + 1 == steps
        if (stride and (k + 1) % stride == 0) or last:
            traj.times.append(t0 + (k + 1) * scheme.tau)
            traj.snapshots.append(psi.reshape(shape).copy())
        if nls and h1_stride and ((k + 1) % h1_stride == 0 or last):
            g = GridFunction(state.box_radius, state.cells_per_unit, state.dimension, psi.reshape(shape))
            traj.h1_norms.append(discrete_sobolev_norms(g, check=False)[0])
    traj.cayley_drift = solver.max_drift
    return traj


def strang_linear(state: GridFunction, scheme: SplitScheme, potential: Optional[DiscretePotential],
                  steps: int, stride: int = 0, t0: float = 0.0) -> Trajectory:
    """Cayley(tau/2) o exp_K(-tau u(t_k) V_con) o Cayley(tau/2), repeated."""
    if scheme.kind != "linear":
        raise ValueError("scheme must be linear")
    return _run(state, scheme, potential, steps, stride, t0)


def strang_nls(state: GridFunction, scheme: SplitScheme, potential: Optional[DiscretePotential],
               steps: int, stride: int = 0, t0: float = 0.0, h1_stride: int = 1) -> Trajectory:
    """Same three stages with phase exp_K(-tau (u V_con + nu |psi|^(sigma-1)))."""
    if scheme.kind != "nls":
        raise ValueError("scheme must be nls")
    return _run(state, scheme, potential, steps, stride, t0, h1_stride)


def lipschitz_substitution_check(reference: Trajectory, perturbed: list, sizes) -> list:
    """max_k ||psi(t_k) - psi~(t_k)|| / size for every perturbed run.

    Identical trajectories give 0.0 (the 0/0 case is reported as exact zero).
    """
    out = []
    R, m, d = reference.grid
    dv = (1.0 / m) ** (d / 2)
    for run, size in zip(perturbed, sizes):
        if len(run.snapshots) != len(reference.snapshots):
            raise ValueError("runs must share the snapshot schedule")
        diff = max(dv * float(np.linalg.norm((a - b).ravel()))
                   for a, b in zip(reference.snapshots, run.snapshots))
        out.append(0.0 if diff == 0.0 else diff / size)
    return out
