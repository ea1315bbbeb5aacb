"""Domain truncation, singularity excision and smoothing of rough inputs.

Everything here is pure: samplers go in, samplers (plus the bounds that
certify them) come out.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .core import BudgetInfeasible, ConfigError, InitialState, PotentialModel, tail_bound
from .qmc import certificate, first_primes, halton_points

RADIUS_LADDER_MAX = 60


class RadiusRule(enum.Enum):
    TAIL_ONLY = "tail"
    BOUNDARY_FLUX = "flux"


@dataclass(frozen=True)
class RadiusCertificate:
    R: float
    epsilon_share: float
    constants: dict
    rule: RadiusRule
    lhs: float  # value of the inequality's left side at R

    def holds(self) -> bool:
        return radius_lhs(self.R, self.rule, **self.constants) <= self.epsilon_share


def radius_lhs(R, rule, C1, C_T=1.0, D1=1.0, eta=1.0):
    if rule is RadiusRule.TAIL_ONLY:
        return C1 * R ** (-eta)
    return D1 * 2 * C_T * C1 ** 2 / R + C_T * C1 / R ** 2


def choose_radius(state_bound: float, flow_constant: float, eps_share: float,
                  rule: RadiusRule = RadiusRule.TAIL_ONLY, eta: float = 1.0,
                  D1: float = 1.0) -> RadiusCertificate:
    """Smallest R = 2^k (k >= 0) satisfying the rule's inequality."""
    if not (state_bound > 0 and flow_constant > 0 and eps_share > 0 and eta > 0 and D1 > 0):
        raise ValueError("all constants must be positive")
    consts = dict(C1=state_bound, C_T=flow_constant, D1=D1, eta=eta)
    for k in range(RADIUS_LADDER_MAX + 1):
        R = 2.0 ** k
        lhs = radius_lhs(R, rule, **consts)
        if lhs <= eps_share:
            return RadiusCertificate(R, eps_share, consts, rule, lhs)
    raise ValueError("radius ladder exhausted")


# -- smooth cutoffs --------------------------------------------------------------

def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1.

    e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)}) is the normalised integral-free form of
    the exp(1 + e^2/(r^2 - e^2)) bump transition.
    """
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def _step_derivative_sup(order: int) -> float:
    u = np.linspace(0.0, 1.0, 200001)
    v = smooth_step(u)
    for _ in range(order):
        v = np.gradient(v, u)
    return float(np.max(np.abs(v)))


# sup|S'| = 2 at u = 1/2; tabulated with a safety margin
STEP_DERIVATIVE_SUP = {0: 1.0, 1: 2.0 * 1.01}


class CutoffKind(enum.Enum):
    GAMMA_R = "gamma"
    ZETA = "zeta"


@dataclass(frozen=True)
class CutoffSpec:
    kind: CutoffKind
    centers: np.ndarray
    inner: float  # inner radius (gamma: half-width of the region kept intact)
    width: float  # transition width

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is CutoffKind.GAMMA_R:
            # product of per-axis transitions: 1 on |x_i| <= inner, 0 on |x_i| >= inner + width
            out = np.ones(len(pts))
            for i in range(pts.shape[1]):
                out = out * smooth_step((self.inner + self.width - np.abs(pts[:, i])) / self.width)
            return out
        out = np.ones(len(pts))
        for c in np.atleast_2d(self.centers):
            r = np.sqrt(np.sum((pts - c) ** 2, axis=1))
            out = out * smooth_step((r - self.inner) / self.width)
        return out

    def derivative_sup(self) -> float:
        """Bound on any first partial derivative."""
        if self.kind is CutoffKind.GAMMA_R:
            return STEP_DERIVATIVE_SUP[1] / self.width
        # supports of distinct bumps are disjoint when the gap exceeds 2 (inner + width)
        return STEP_DERIVATIVE_SUP[1] / self.width


def gamma_cutoff(R: float, d: int) -> CutoffSpec:
    """gamma_R: identity on [-R/2, R/2]^d, zero outside (-R, R)^d."""
    return CutoffSpec(CutoffKind.GAMMA_R, np.zeros((1, d)), R / 2, R / 2)


def zeta_cutoff(centers, delta: float) -> CutoffSpec:
    """zeta: zero on the delta-balls around the centers, one beyond 2 delta."""
    return CutoffSpec(CutoffKind.ZETA, np.atleast_2d(np.asarray(centers, dtype=float)), delta, delta)


@dataclass(frozen=True)
class ExcisedPotential:
    sampler: Callable
    cutoff: Optional[CutoffSpec]
    delta: float
    w_inf_bound: float  # W^{1,inf} bound of zeta * W_sing on the box


def excise_singularities(pot: PotentialModel, eps_share: float, R: float) -> ExcisedPotential:
    """Replace W_sing by zeta W_sing, zeta vanishing near every singularity in the box."""
    ws = pot.w_sing
    if ws is None:
        raise ConfigError("potential has no singular part")
    delta, K = ws.blowup_control(eps_share / 2, R)
    if not delta > 0:
        raise ConfigError(f"blow-up control returned non-positive delta {delta}")
    sing = np.atleast_2d(np.asarray(ws.singularities, dtype=float))
    inside = sing[np.all(np.abs(sing) < R + 2 * delta, axis=1)]
    if len(inside) == 0:
        return ExcisedPotential(ws.sampler, None, delta, float(K))
    if len(inside) > 1 and ws.gap < 4 * delta:
        raise ConfigError("excision balls overlap: gap below 4 delta")
    zeta = zeta_cutoff(inside, delta)

    def sampler(points, _z=zeta, _w=ws.sampler):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        z = _z(pts)
        out = np.zeros(len(pts), dtype=complex)
        keep = z > 0
        if keep.any():
            out[keep] = z[keep] * _w(pts[keep])
        return out

    # Leibniz: |d(zeta W)| <= |zeta'| |W| + |zeta| |W'| <= K (1 + sup|zeta'|)
    return ExcisedPotential(sampler, zeta, delta, float(K) * (1.0 + zeta.derivative_sup()))


# -- mollification ---------------------------------------------------------------

def gaussian_tail_mass(sigma, xi, d=1) -> float:
    """Mass of the centred Gaussian (std sigma per axis) outside the cube [-xi, xi]^d."""
    inside = 1.0 - special.erfc(xi / (math.sqrt(2.0) * sigma))
    return 1.0 - inside ** d


def mollifier_derivative_l1(sigma, d=1) -> float:
    """||d chi_sigma / d x_i||_{L1} = sqrt(2/pi) / sigma for every axis."""
    return math.sqrt(2.0 / math.pi) / sigma


@dataclass
class MollifiedPotential:
    base: Callable
    sigma: float
    xi: float
    d: int
    N: int
    sup_bound: float
    tail: float  # sup_bound * Gaussian mass outside the integration cube
    integration_bound: float  # Koksma-Hlawka bound for the cube integral
    derivative_bound: float  # sup_bound * ||chi'||_L1
    _pts: np.ndarray = field(default=None, repr=False)
    _w: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        t = halton_points(first_primes(self.d), self.N)
        y = -self.xi + 2 * self.xi * t
        self._pts = y
        norm = (2 * math.pi * self.sigma ** 2) ** (-self.d / 2)
        self._w = (2 * self.xi) ** self.d * norm * np.exp(-np.sum(y ** 2, axis=1) / (2 * self.sigma ** 2))

    def __call__(self, points, chunk=2 ** 20):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(pts), dtype=complex)
        step = max(1, chunk // self.N)
        for s in range(0, len(pts), step):
            x = pts[s:s + step, None, :] - self._pts[None, :, :]
            vals = np.asarray(self.base(x.reshape(-1, self.d)), dtype=complex).reshape(len(x), self.N)
            out[s:s + step] = vals @ self._w / self.N
        return out


def mollify_potential(sampler, sigma: float, xi: float, d: int = 1, v_bounds=(1.0, 0.0),
                      N: int = 4096, precision: Optional[float] = None) -> MollifiedPotential:
    """x -> integral over |y_i| <= xi of V(x - y) chi_sigma(y) dy by Halton averages.

    v_bounds = (sup|V|, variation of V on the relevant box).  The Gaussian
    part has per-axis sup s = 2 xi / (sqrt(2 pi) sigma) and variation 2 s
    after rescaling the cube to [0, 1].
    """
    if not (sigma > 0 and xi > 0):
        raise ValueError("sigma and xi must be positive")
    vsup, vtv = v_bounds
    tail = vsup * gaussian_tail_mass(sigma, xi, d)
    if precision is not None and tail > precision:
        raise BudgetInfeasible(f"mollifier tail {tail:.3e} above requested {precision:.3e}", "mollification")
    s1 = 2 * xi / (math.sqrt(2 * math.pi) * sigma)
    integ = tv_product_bound((vsup, vtv), (s1 ** d, (3 * s1) ** d), d) * certificate(first_primes(d), N).bound
    return MollifiedPotential(sampler, sigma, xi, d, N, vsup, tail, integ,
                              vsup * mollifier_derivative_l1(sigma, d))


# -- Hermite smoothing -----------------------------------------------------------

def hermite_functions(n_max: int, x) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_{n_max-1} at x, shape (n_max, len(x)).

    Three-term recurrence on psi_n e^{x^2/2}; the running scale is kept as a
    logarithm so nothing overflows for n up to several hundred.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((n_max, x.size))
    if n_max == 0:
        return out
    logs = -0.5 * x * x
    prev = np.zeros_like(x)
    cur = np.full_like(x, math.pi ** -0.25)
    out[0] = cur * np.exp(logs)
    for n in range(n_max - 1):
        nxt = math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e100
        if big.any():
            sc = np.where(big, np.abs(cur), 1.0)
            cur, prev = cur / sc, prev / sc
            logs = logs + np.log(sc)
        out[n + 1] = cur * np.exp(logs)
    return out


def hermite_order(C: float, eps: float, delta: float) -> int:
    """Smallest K with C^2 / (2K + 1)^(2 eps) <= delta^2."""
    if not (C >= 0 and eps > 0 and delta > 0):
        raise ValueError("need C >= 0, eps > 0, delta > 0")
    if C <= delta:
        return 0
    K = max(0, int(math.floor(((C / delta) ** (1.0 / eps) - 1) / 2)) - 1)
    while C * C / (2 * K + 1) ** (2 * eps) > delta * delta:
        K += 1
    return K


@dataclass(frozen=True)
class HermiteProjection:
    coefficients: np.ndarray
    K: int
    integration_bound: float  # per-coefficient bound (KH plus the tail outside [-R, R])
    radius: float

    def sampler(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))[:, 0]
        return self.coefficients @ hermite_functions(self.K, x)

    def h44_bound(self, d4: float = 1.0) -> float:
        """d4 ||S^2 phi~||, the eigenvalues of S^2 being (2n + 1)^2."""
        lam = 2.0 * np.arange(self.K) + 1.0
        return d4 * float(np.sqrt(np.sum(lam ** 4 * np.abs(self.coefficients) ** 2)))


def hermite_tv(n: int, R: float) -> float:
    """Variation of psi_n on [-R, R]: sqrt(2R) ||psi_n'||_2 = sqrt(2R (n + 1/2))."""
    return math.sqrt(2 * R * (n + 0.5))


def hermite_integration_bound(K: int, R: float, omega: float, N: int, h_eta=None) -> float:
    """Certified error of every coefficient <psi_n, phi_0>, n < K.

    Koksma-Hlawka on the rescaled integrand 2R psi_n phi_0 plus, when an
    H_eta bound is declared, the mass of phi_0 outside [-R, R].
    """
    cert = certificate((2,), N)
    worst = 0.0
    for n in range(K):
        psi_bounds = (math.pi ** -0.25, hermite_tv(n, R))
        worst = max(worst, 2 * R * tv_product_bound((omega, omega), psi_bounds, 1))
    out = worst * cert.bound
    if h_eta is not None:
        eta, B = h_eta
        out += tail_bound(B, eta, R)  # Cauchy-Schwarz with ||psi_n|| = 1
    return out


def hermite_project(state: InitialState, s_eps_bound, delta: float, R: float = 8.0,
                    N: int = 2 ** 16, strict: bool = True) -> HermiteProjection:
    """Coefficients <psi_n, phi_0>, n < K, by Halton averages over [-R, R] (d = 1).

    The truncation keeps the discarded tail below delta; with strict=True the
    coefficient errors (sqrt(K) times the per-coefficient bound) must also
    stay below delta.
    """
    if state.dimension != 1:
        raise ConfigError("Hermite smoothing is implemented for d = 1")
    eps, C = s_eps_bound
    K = hermite_order(C, eps, delta)
    integ = hermite_integration_bound(K, R, state.clbbv(R), N, state.h_eta)
    if strict and integ * math.sqrt(K) > delta:
        raise BudgetInfeasible(f"Hermite coefficients certified only to {integ:.3e}", "hermite")
    x = -R + 2 * R * halton_points((2,), N)[:, 0]
    phi = np.asarray(state.sampler(x[:, None]), dtype=complex)
    psi = hermite_functions(K, x)
    coeffs = 2 * R * (psi @ phi) / N
    return HermiteProjection(coeffs, K, integ, R)


def tv_product_bound(f_bounds, g_bounds, d: int) -> float:
    """||f|| ||g|| + lam^2 TV(f) TV(g) + lam (TV(f) ||g|| + TV(g) ||f||), lam = 3^d - 2^{d+1} + 2."""
    fs, ft = f_bounds
    gs, gt = g_bounds
    if min(fs, ft, gs, gt) < 0:
        raise ValueError("bounds must be non-negative")
    lam = 3 ** d - 2 ** (d + 1) + 2
    return fs * gs + lam * lam * ft * gt + lam * (ft * gs + gt * fs)
