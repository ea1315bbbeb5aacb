"""Builtin problems, their certificates and closed-form reference solutions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .core import (ConfigError, ControlFunction, Family, InitialState, PotentialModel, ProblemSpec,
                   RegularPart, SingularPart, constant_control)

PI14 = math.pi ** -0.25


# -- closed forms -----------------------------------------------------------------

@dataclass(frozen=True)
class CoherentField:
    """Exact solution of i psi_t = -a psi_xx - F(t) x psi with Gaussian data.

    psi = pi^{-1/4} A^{-1/2} exp(-(x - x_c)^2 / (2A) + i p x - i a int p^2),
    A = 1 + 2 i a t, p = int F, x_c = 2a int p.  At a = 1/2 this is the
    density |psi|^2 = exp(-(x - x_c)^2/|A|^2)/|A| with x_c = int int F, i.e.
    A0 = 1 and B0 = -i in the (A0 - B0 t) parametrisation.
    """

    a: float = 0.5
    F: Callable[[float], float] = lambda t: 0.0
    p: Optional[Callable] = None  # int_0^t F
    q: Optional[Callable] = None  # int_0^t p
    w: Optional[Callable] = None  # int_0^t p^2

    def _p(self, t):
        if self.p is not None:
            return self.p(t)
        return integrate.quad(self.F, 0.0, t, limit=200, epsabs=1e-13)[0]

    def _q(self, t):
        if self.q is not None:
            return self.q(t)
        return integrate.quad(self._p, 0.0, t, limit=200, epsabs=1e-13)[0]

    def _w(self, t):
        if self.w is not None:
            return self.w(t)
        return integrate.quad(lambda s: self._p(s) ** 2, 0.0, t, limit=200, epsabs=1e-13)[0]

    def center(self, t) -> float:
        return 2 * self.a * self._q(t)

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        A = 1.0 + 2j * self.a * t
        xc, p = self.center(t), self._p(t)
        return PI14 / np.sqrt(A) * np.exp(-(x - xc) ** 2 / (2 * A) + 1j * p * x - 1j * self.a * self._w(t))

    def density(self, x, t):
        return np.abs(self(x, t)) ** 2

    def weighted_norm(self, t, eta) -> float:
        """||<x>^eta psi(t)|| by quadrature around the packet."""
        xc = self.center(t)
        s = abs(1.0 + 2j * self.a * t)
        x = np.linspace(xc - 40 * s - 5, xc + 40 * s + 5, 400001)
        dens = (1 + x * x) ** eta * self.density(x, t)
        return float(math.sqrt(np.trapezoid(dens, x)))


def coherent_constant(F0: float, a: float = 0.5) -> CoherentField:
    return CoherentField(a, lambda t: F0, p=lambda t: F0 * t, q=lambda t: F0 * t * t / 2,
                         w=lambda t: F0 * F0 * t ** 3 / 3)


def coherent_sine(F0: float, omega: float, a: float = 0.5) -> CoherentField:
    c = F0 / omega
    return CoherentField(
        a, lambda t: F0 * math.sin(omega * t),
        p=lambda t: c * (1 - math.cos(omega * t)),
        q=lambda t: c * (t - math.sin(omega * t) / omega),
        w=lambda t: c * c * (1.5 * t - 2 * math.sin(omega * t) / omega + math.sin(2 * omega * t) / (4 * omega)))


@dataclass(frozen=True)
class QuinticBlowup:
    """Explicit blow-up of i psi_t = -psi_xx - |psi|^4 psi.

    u(x, t) = (T/(T - t))^{1/2} exp(i [x^2/(4(t - T)) + t T/(T - t)]) phi(T x/(T - t)),
    phi(x) = (3^{1/2}/cosh 2x)^{1/2}.  Both exponent terms are phases; without
    the factor i on the second one the formula does not solve the equation.
    """

    T_star: float = 10.0

    @staticmethod
    def profile(x):
        return np.sqrt(math.sqrt(3.0) / np.cosh(2 * np.asarray(x, dtype=float)))

    def __call__(self, x, t):
        T = self.T_star
        if t >= T:
            raise ValueError(f"t = {t} is not before the blow-up time {T}")
        x = np.asarray(x, dtype=float)
        s = T / (T - t)
        return math.sqrt(s) * np.exp(1j * (x * x / (4 * (t - T)) + t * s)) * self.profile(s * x)

    def amplitude(self, t) -> float:
        return float(abs(self(0.0, t)))


# -- certificates of the builtin data ----------------------------------------------

def gaussian_state(dimension=1, eta=2.0, name="gaussian") -> InitialState:
    """pi^{-d/4} exp(-|x|^2/2) with its Sobolev, weight and CLBBV certificates."""
    d = dimension

    def sampler(points):
        pts = np.atleast_2d(points)
        return PI14 ** d * np.exp(-0.5 * np.sum(pts * pts, axis=1)) + 0j

    return InitialState(sampler, ("H2+eps_2", gaussian_sobolev(3.0, 2.0) ** d), 1.0,
                        lambda R: (3.0 * PI14) ** d, d, grad_bound=PI14 ** d,
                        h_eta=(eta, gaussian_weighted_norm(eta) ** d), l2_bound=1.0, name=name)


def gaussian_weighted_norm(eta: float) -> float:
    """||<x>^eta g|| for g = pi^{-1/4} e^{-x^2/2}, by quadrature with 1e-9 headroom."""
    x = np.linspace(-60, 60, 1200001)
    v = np.trapezoid((1 + x * x) ** eta * PI14 ** 2 * np.exp(-x * x), x)
    return float(math.sqrt(v) * (1 + 1e-9))


def gaussian_sobolev(rho: float, eta: float) -> float:
    """sqrt(||<xi>^rho g^||^2 + ||<x>^eta g||^2); g is its own Fourier transform."""
    return math.hypot(gaussian_weighted_norm(rho), gaussian_weighted_norm(eta))


def exp_abs_weighted_norm(eta: float) -> float:
    """||<x>^eta e^{-|x|}|| by quadrature with 1e-9 headroom."""
    from scipy.integrate import quad

    v, _ = quad(lambda x: (1 + x * x) ** eta * math.exp(-2 * x), 0, math.inf, epsabs=0, epsrel=1e-13)
    return math.sqrt(2 * v) * (1 + 1e-9)


def exp_abs_state(eta: float = 6.0) -> InitialState:
    """e^{-|x|}: ||phi||^2 = 1, ||S^{1/2} phi||^2 = ||phi'||^2 + ||x phi||^2 = 3/2.

    The weighted norm uses a high moment: the tail e^{-R} is tiny but a low
    eta makes the certified tail bound <R>^{-eta} decay too slowly to plan.
    """
    return InitialState(lambda p: np.exp(-np.abs(np.atleast_2d(p)[:, 0])) + 0j,
                        ("S^eps", math.sqrt(1.5)), 0.5, lambda R: 3.0, 1,
                        h_eta=(eta, exp_abs_weighted_norm(eta)), l2_bound=1.0, name="exp-abs")


def zero_state(d=1) -> InitialState:
    return InitialState(lambda p: np.zeros(len(np.atleast_2d(p)), dtype=complex), ("H2+eps_2", 0.0),
                        1.0, lambda R: 0.0, d, grad_bound=0.0, h_eta=(1.0, 0.0), l2_bound=0.0, name="zero")


def _linear_vcon(d=1):
    return RegularPart(lambda p, t=0.0: -np.atleast_2d(p)[:, 0] + 0j, lambda R: 1.0)


# -- catalogue -----------------------------------------------------------------------

@dataclass
class Builtin:
    name: str
    problem: ProblemSpec
    state: InitialState
    potential: PotentialModel
    exact: Optional[Callable] = None  # (x, t) -> complex
    pinned: dict = field(default_factory=dict)  # calibrated constant overrides
    note: str = ""
    lattice: Optional[dict] = None


def _coherent_pinned(ref: CoherentField, T: float, eta: float, C_grid: float, C_split: float):
    c1 = max(ref.weighted_norm(t, eta) for t in np.linspace(0.0, T, 9))
    return dict(C1=c1, C_T=1.0, D1=1.0, C_grid=C_grid, C_cn=1e-12, C_split=C_split, C_int=1.0,
                psi_sup=1.0, C_moll=1.0, d4=1.0)


def free_gaussian() -> Builtin:
    ref = CoherentField(1.0)
    eta = 8.0
    st = gaussian_state(1, eta, "free-gaussian")
    return Builtin("free-gaussian", ProblemSpec(Family.LINEAR, 1, 1.0, 1.0), st, PotentialModel(), ref,
                   pinned=_coherent_pinned(ref, 1.0, eta, C_grid=4.0, C_split=4.0),
                   note="dispersing Gaussian, exact solution known")


def coherent_field(F0: float = 50.0) -> Builtin:
    ref = coherent_constant(F0)
    eta = 40.0
    st = gaussian_state(1, eta, "coherent-field")
    pot = PotentialModel(v_con=_linear_vcon(), u=constant_control(F0, 1.0), global_bound=0.0)
    return Builtin("coherent-field", ProblemSpec(Family.LINEAR, 1, 1.0, 2 ** -0.5), st, pot, ref,
                   pinned=_coherent_pinned(ref, 1.0, eta, C_grid=60.0, C_split=3e6),
                   note="Gaussian in the constant field F = 50")


def coherent_field_sin(F0: float = 200.0, omega: float = 6 * math.pi) -> Builtin:
    ref = coherent_sine(F0, omega)
    eta = 24.0
    st = gaussian_state(1, eta, "coherent-field-sin")
    w11 = F0 * (2 / math.pi) * (1 + omega) * 1.01
    u = ControlFunction(lambda t: F0 * math.sin(omega * t), (0.0, 1.0), w11, F0)
    pot = PotentialModel(v_con=_linear_vcon(), u=u)
    return Builtin("coherent-field-sin", ProblemSpec(Family.LINEAR, 1, 1.0, 2 ** -0.5), st, pot, ref,
                   pinned=_coherent_pinned(ref, 1.0, eta, C_grid=60.0, C_split=3e6),
                   note="oscillating field F = 200 sin(6 pi t)")


def defocusing(sigma: int) -> Builtin:
    st = gaussian_state(1, 4.0, f"defocusing-{'cubic' if sigma == 3 else 'quintic'}")
    pinned = dict(C1=2 * st.h_eta[1], C_T=1.0, D1=1.0, C_grid=4.0, C_cn=1e-12, C_split=4.0, C_int=2.0,
                  psi_sup=1.0, C_moll=1.0, d4=1.0)
    return Builtin(st.name, ProblemSpec(Family.DEFOCUSING_NLS, 1, 1.0, 1.0, sigma, 1), st, PotentialModel(),
                   pinned=pinned, note="defocusing NLS with Gaussian data")


def lattice_gaussian(d: int = 1, nu: int = 1) -> Builtin:
    st = gaussian_state(d, 4.0, "lattice-gaussian")
    pinned = dict(C_lattice=1.0, C_split=1.0, C_T=1.0, psi_sup=1.0)
    return Builtin("lattice-gaussian", ProblemSpec(Family.LATTICE_NLS, d, 1.0, 1.0, 3, nu), st, PotentialModel(),
                   pinned=pinned, lattice=dict(width=4.0, s=4.0),
                   note="discrete NLS with a sampled Gaussian")


def rough_hermite() -> Builtin:
    st = exp_abs_state()
    pot = PotentialModel(w_reg=RegularPart(lambda p, t=0.0: 0.5 * np.atleast_2d(p)[:, 0] ** 2 + 0j,
                                           lambda R: R))
    pinned = dict(C1=1.0, C_T=1.0, D1=1.0, C_grid=4.0, C_cn=1e-12, C_split=4.0, C_int=1.0, psi_sup=1.0,
                  C_moll=1.0, d4=1.0)
    return Builtin("rough-hermite", ProblemSpec(Family.LINEAR, 1, 0.25, 1.0), st, pot, pinned=pinned,
                   note="e^{-|x|} smoothed by Hermite projection, harmonic potential")


def rough_step(height: float = 1.0) -> Builtin:
    st = gaussian_state(1, 4.0, "rough-step")
    step = RegularPart(lambda p, t=0.0: height * (np.atleast_2d(p)[:, 0] > 0) + 0j, None)
    pot = PotentialModel(w_reg=step, global_bound=height,
                         w_eps_p_control=lambda r: height * math.sqrt(2 * r + 2) * 2.0, eps_p=(0.25, 2.0))
    pinned = dict(C1=2 * st.h_eta[1], C_T=1.0, D1=1.0, C_grid=4.0, C_cn=1e-12, C_split=4.0, C_int=1.0,
                  psi_sup=1.0, C_moll=1.0, d4=1.0)
    return Builtin("rough-step", ProblemSpec(Family.LINEAR, 1, 0.25, 1.0), st, pot, pinned=pinned,
                   note="step potential, Gaussian mollification")


def singular_root() -> Builtin:
    """W_sing = |x|^{-1/4}: ||W 1_{|x| < 2 delta}||_2 = 2 (2 delta)^{1/4}."""
    st = gaussian_state(1, 4.0, "singular-root")

    def control(eps, R):
        delta = (eps / 2) ** 4 / 2
        return delta, delta ** -0.25 + 0.25 * delta ** -1.25

    def sampler(p, t=0.0):
        x = np.abs(np.atleast_2d(p)[:, 0])
        with np.errstate(divide="ignore"):
            return x ** -0.25 + 0j

    sing = SingularPart(sampler, np.zeros((1, 1)), 2.0, control,
                        variation=lambda delta, R: 5.0 * delta ** -0.25)
    pot = PotentialModel(w_sing=sing)
    pinned = dict(C1=2 * st.h_eta[1], C_T=1.0, D1=1.0, C_grid=4.0, C_cn=1e-12, C_split=4.0, C_int=1.0,
                  psi_sup=1.0, C_moll=1.0, d4=1.0)
    return Builtin("singular-root", ProblemSpec(Family.LINEAR, 1, 0.25, 1.0), st, pot, pinned=pinned,
                   note="integrable singularity |x|^{-1/4} removed by a smooth cutoff")


BUILTINS = {
    "free-gaussian": free_gaussian,
    "coherent-field": coherent_field,
    "coherent-field-sin": coherent_field_sin,
    "defocusing-cubic": lambda: defocusing(3),
    "defocusing-quintic": lambda: defocusing(5),
    "lattice-gaussian": lattice_gaussian,
    "rough-hermite": rough_hermite,
    "rough-step": rough_step,
    "singular-root": singular_root,
}

REFERENCES = ("coherent-field", "coherent-field-sin", "free-gaussian", "quintic-blowup")


def builtin(name: str) -> Builtin:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigError(f"unknown builtin {name!r}; known: {', '.join(sorted(BUILTINS))}") from None


def reference(name: str, t: float, x):
    """Closed-form value of a reference problem at (x, t)."""
    if name == "quintic-blowup":
        return QuinticBlowup()(x, t)
    if name in ("coherent-field", "coherent-field-sin", "free-gaussian"):
        return builtin(name).exact(x, t)
    raise ConfigError(f"no closed form for {name!r}; known: {', '.join(REFERENCES)}")
