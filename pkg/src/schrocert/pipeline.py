"""From a planned budget to a trajectory: sample, discretise, propagate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .budget import BudgetConstants, ErrorBudget, plan
from .core import (Family, GridFunction, InitialState, PotentialModel, ProblemSpec, grid_l2_norm)
from .lattice import LatticeTrajectory, from_sampler, lattice_strang
from .problems import QuinticBlowup
from .propagate import DiscretePotential, SplitScheme, Trajectory, strang_linear, strang_nls
from .qmc import HaltonConfig, cubic_discretize, first_primes
from .truncation import excise_singularities, gamma_cutoff, hermite_project, mollify_potential


@dataclass
class SolveResult:
    budget: ErrorBudget
    trajectory: object  # Trajectory or LatticeTrajectory
    initial: Optional[GridFunction] = None

    def final(self):
        return self.trajectory.snapshots[-1]


def state_sampler(state: InitialState, b: ErrorBudget):
    """Sampler of gamma_R phi_0, with phi_0 replaced by its Hermite projection when planned."""
    base = state.sampler
    if b.inputs["hermite"]:
        proj = hermite_project(state, (state.eps_reg, state.sobolev_bound[1]),
                               b.shares["hermite"] / (2 * b.const("C_int")), R=b.params["R"],
                               N=b.params["hermite_N"])
        base = proj.sampler
    gamma = gamma_cutoff(b.params["R"], state.dimension)
    return lambda pts: gamma(pts) * np.asarray(base(pts), dtype=complex)


def potential_samplers(pot: PotentialModel, b: ErrorBudget, d: int):
    """(static sampler or None, V_con sampler or None) as planned."""
    parts = []
    if pot.w_reg is not None:
        if b.inputs["moll"]:
            vsup = b.inputs["moll_vsup"]
            parts.append(mollify_potential(pot.w_reg.sampler, b.params["sigma"], b.params["xi"], d,
                                           (vsup, b.inputs["moll_vtv"]), N=b.params["N"]))
        else:
            parts.append(pot.w_reg.sampler)
    if pot.w_sing is not None:
        parts.append(excise_singularities(pot, 2 * b.params["excision_eps"], b.params["R"]).sampler)
    static = None
    if parts:
        static = lambda pts: sum(np.asarray(p(pts), dtype=complex) for p in parts)
    vcon = pot.v_con.sampler if pot.v_con is not None and pot.u is not None else None
    return static, vcon


def solve(problem: ProblemSpec, state: InitialState, pot: Optional[PotentialModel], eps: float,
          constants: Optional[BudgetConstants] = None, stride: int = 0, budget: Optional[ErrorBudget] = None,
          lattice: Optional[dict] = None) -> SolveResult:
    pot = pot or PotentialModel()
    b = budget or plan(problem, state, pot, eps, constants, lattice)
    p = b.params
    if problem.family is Family.LATTICE_NLS:
        v0 = from_sampler(lambda k: state.sampler(k / (lattice or {}).get("width", 1.0)),
                          int(p["R"]), problem.dimension, b.inputs["s"])
        tr = lattice_strang(v0, problem.nu, problem.sigma, p["tau"], p["steps"], p["K"], stride)
        return SolveResult(b, tr)
    d = problem.dimension
    R, m, N, M = p["R"], p["m"], p["N"], p["M"]
    halton = HaltonConfig(first_primes(d), N)
    psi0 = cubic_discretize(state_sampler(state, b), (R, m), halton, M)
    static, vcon = potential_samplers(pot, b, d)
    V = cubic_discretize(static, (R, m), halton, M).values.real if static is not None else None
    Vc = cubic_discretize(vcon, (R, m), halton, M).values.real if vcon is not None else None
    dp = DiscretePotential(V, Vc, pot.u.fn if Vc is not None else None)
    exp_tol = b.shares["exponential"] / (b.const("C_int") * p["steps"] * max(state.norm_bound, 1e-300)) \
        if b.shares["exponential"] > 0 else None
    r0 = b.const("phase_range")
    if problem.family is Family.LINEAR:
        scheme = SplitScheme("linear", p["tau"], p["K"], problem.mu, phase_range=r0, phase_tol=exp_tol)
        tr = strang_linear(psi0, scheme, dp, p["steps"], stride)
    else:
        scheme = SplitScheme("nls", p["tau"], p["K"], problem.mu, problem.sigma, problem.nu,
                             phase_range=r0, phase_tol=exp_tol)
        tr = strang_nls(psi0, scheme, dp, p["steps"], stride, h1_stride=max(1, p["steps"] // 100))
    return SolveResult(b, tr, psi0)


def l2_error(result: SolveResult, exact, t=None) -> float:
    """Grid L2 distance between the final state and the exact solution's cell means."""
    from .fdm import gauss_cell_means

    tr = result.trajectory
    t = tr.times[-1] if t is None else t
    R, m, d = tr.grid
    ex = gauss_cell_means(lambda x: exact(x, t), R, m)
    diff = tr.snapshots[-1].ravel() - ex.ravel()
    return float((1.0 / m) ** (d / 2) * np.linalg.norm(diff))


# -- blow-up demonstration -------------------------------------------------------------

@dataclass
class BlowupReport:
    T_star: float
    times: np.ndarray
    exact: np.ndarray  # amplitude at x = 0
    numerical: np.ndarray  # sup norm of the numerical state
    exact_ratio: float  # between t = 9 and t = 9.9
    numerical_ratio: float
    plateau: bool
    grid: tuple

    def rows(self):
        return [(float(t), float(e), float(n)) for t, e, n in zip(self.times, self.exact, self.numerical)]


def demo_blowup(R: float = 16.0, m: int = 16, tau: float = 1 / 400, t_end: float = 9.9, K: int = 12,
                N: int = 16, T_star: float = 10.0) -> BlowupReport:
    """Focusing quintic NLS from the explicit blow-up profile on a fixed grid."""
    q = QuinticBlowup(T_star)
    psi0 = cubic_discretize(lambda p: q(p[:, 0], 0.0), (R, m), HaltonConfig((2,), N))
    scheme = SplitScheme("nls", tau, K, 1.0, 5, -1, phase_range=1.0, phase_tol=1e-10)
    steps = int(round(t_end / tau))
    stride = max(1, int(round(0.1 / tau)))
    tr = strang_nls(psi0, scheme, None, steps, stride=stride, h1_stride=0)
    times = np.array(tr.times)
    num = np.array([np.abs(s).max() for s in tr.snapshots])
    exact = np.array([q.amplitude(t) for t in times])
    i9 = int(np.argmin(np.abs(times - 9.0)))
    i99 = int(np.argmin(np.abs(times - 9.9)))
    er = exact[i99] / exact[i9]
    nr = num[i99] / num[i9]
    return BlowupReport(T_star, times, exact, num, er, nr, bool(er >= 3 and nr < er / 2), (R, m, tau))
