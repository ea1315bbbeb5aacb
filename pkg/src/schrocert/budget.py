"""Accuracy budget: split eps over the error sources and derive (R, h, tau, N, K, M).

plan() never samples the input functions; it reads their declared
certificates only, so two inputs with the same class constants get the same
budget.  Every parameter is the first point of a dyadic ladder at which a
recorded inequality holds, and replay() re-evaluates those inequalities from
the numbers stored in the budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .core import BudgetInfeasible, ConfigError, Family, InitialState, PotentialModel, ProblemSpec
from .propagate import choose_k, remainder_bound
from .qmc import certificate, first_primes
from .truncation import (RadiusRule, gaussian_tail_mass, hermite_integration_bound, hermite_order,
                         hermite_tv, radius_lhs, tv_product_bound)

SOURCES = ("truncation", "excision", "mollification", "hermite", "grid", "time", "exponential", "integration")
LADDER = 60
N_MAX = 2 ** 30
# operation counts per cell used by uniform_runtime_estimate
SOLVE_OPS_1D = 30
SOLVE_OPS_BANDED = 8
PHASE_OPS_BASE = 10
PHASE_OPS_PER_K = 4


@dataclass(frozen=True)
class BudgetConstants:
    """Unquantified constants of the error analysis.  None means documented default."""

    C_T: Optional[float] = None  # Gronwall-type flow constant
    D1: Optional[float] = None  # boundary-flux constant
    C1: Optional[float] = None  # sup_t ||psi(t)||_{H_eta}
    C_grid: Optional[float] = None  # grid error <= C_grid h
    C_cn: Optional[float] = None  # CN error <= T C_cn tau^2 / h^4 (h^6 for NLS)
    C_split: Optional[float] = None  # splitting error <= C_split T tau^2
    C_int: Optional[float] = None  # Lipschitz constant of the flow in the sampled inputs
    psi_sup: Optional[float] = None  # a priori sup-norm bound of the flow
    C_moll: Optional[float] = None  # ||V - V_sigma||_p <= C_moll sigma^eps ||V||_{W^{eps,p}}
    d4: Optional[float] = None  # ||psi||_{H^4_4} <= d4 ||S^2 psi||
    C_lattice: Optional[float] = None
    c_flow: float = 4.0
    phase_range: float = 1.0
    radius_rule: str = "tail"
    max_cells: int = 2 ** 26
    M: int = 52

    @classmethod
    def unit(cls, **kw):
        """Every unquantified constant pinned to 1."""
        base = dict(C_T=1.0, D1=1.0, C1=1.0, C_grid=1.0, C_cn=1.0, C_split=1.0, C_int=1.0,
                    psi_sup=1.0, C_moll=1.0, d4=1.0, C_lattice=1.0)
        base.update(kw)
        return cls(**base)

    def override(self, **kw) -> "BudgetConstants":
        known = {f.name for f in fields(self)}
        bad = set(kw) - known
        if bad:
            raise ConfigError(f"unknown constants: {', '.join(sorted(bad))}")
        return replace(self, **kw)


@dataclass
class ErrorBudget:
    epsilon: float
    shares: dict
    params: dict
    constants_used: dict  # name -> (value, provenance)
    inputs: dict  # class constants read from the certificates
    records: dict = field(default_factory=dict)

    def serialize(self) -> list:
        """'key = value' ledger lines (deterministic order, round-trip floats)."""
        out = [f"epsilon = {_fmt(self.epsilon)}"]
        for k in SOURCES:
            out.append(f"share.{k} = {_fmt(self.shares[k])}")
        for k in sorted(self.params):
            out.append(f"param.{k} = {_fmt(self.params[k])}")
        for k in sorted(self.constants_used):
            v, tag = self.constants_used[k]
            out.append(f"const.{k} = {_fmt(v)} [{tag}]")
        for k in sorted(self.inputs):
            out.append(f"input.{k} = {_fmt(self.inputs[k])}")
        for k in sorted(self.records):
            out.append(f"record.{k} = {_fmt(self.records[k])}")
        return out

    def const(self, name):
        return self.constants_used[name][0]


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, (list, tuple)):
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    return str(v)


# -- constants -------------------------------------------------------------------------

def _resolve(consts: BudgetConstants, problem: ProblemSpec, state: InitialState, pot: PotentialModel,
             sobolev: float) -> dict:
    T = problem.horizon
    u = pot.u
    u_w11 = u.w11_budget if u is not None else 0.0
    u_sup = u.sup if u is not None else 0.0
    out = {}

    def put(name, default, tag):
        v = getattr(consts, name)
        out[name] = (float(v), "pinned") if v is not None else (float(default), tag)

    put("C_T", math.exp(min(700.0, consts.c_flow * T * (1 + u_w11) * (1 + pot.global_bound))), "heuristic")
    C_T = out["C_T"][0]
    C0 = state.h_eta[1] if state.h_eta is not None else state.norm_bound
    put("D1", 1.0, "default")
    put("C1", C_T * max(C0, 1e-300), "heuristic")
    put("C_grid", C_T * (1 + T) * problem.mu ** 2 * sobolev, "heuristic")
    put("C_cn", C_T * sobolev, "heuristic")
    put("C_split", C_T * (1 + u_sup + pot.global_bound) ** 2 * max(sobolev, 1.0), "heuristic")
    if problem.family is Family.LINEAR:
        put("C_int", 1.0, "derived")  # unitary flow: Duhamel gives Lipschitz constant 1
    else:
        put("C_int", C_T, "heuristic")
    put("psi_sup", C_T * state.clbbv(1.0), "heuristic")
    put("C_moll", 1.0, "heuristic")
    put("d4", 1.0, "default")
    put("C_lattice", 1.0, "default")
    out["phase_range"] = (float(consts.phase_range), "default" if consts.phase_range == 1.0 else "pinned")
    return out


# -- the inequalities ----------------------------------------------------------------------

def _disc(d, N):
    return certificate(first_primes(d), int(N)).bound


def _cell_growth(h, d):
    return (1 + h) ** d - 1


def _state_variation(inp, p, cells):
    """sqrt(sum_j TV_j^2) over the cells for the (possibly smoothed) initial state."""
    d, h = inp["d"], p["h"]
    if inp["hermite"]:
        K = p["hermite_K"]
        norm = inp["norm0"]
        omega = math.sqrt(K) * norm * math.pi ** -0.25 + norm * math.sqrt(
            sum(hermite_tv(n, p["R"]) ** 2 for n in range(K)))
    else:
        omega = inp["omega_R"]
    route = omega * (1.0 if d == 1 else math.sqrt(cells))
    if inp["grad_bound"] is not None:
        route = min(route, inp["grad_bound"] * _cell_growth(h, d) * math.sqrt(cells))
    return route


def integration_error(inp, p, consts) -> dict:
    """Terms of the sampled-input error at the parameters p."""
    d, h, N, M = inp["d"], p["h"], p["N"], p["M"]
    cells = p["cells"]
    D = _disc(d, N)
    rnd = N * 2.0 ** (-M)
    T, norm0 = inp["T"], inp["norm0"]
    e_state = h ** (d / 2) * (_state_variation(inp, p, cells) * D + rnd * cells)
    g = _cell_growth(h, d)
    e_static = 0.0
    if inp["static_lip"] is not None:
        e_static += (inp["static_lip"] * g * D + rnd) * norm0
    if inp["moll"]:
        lip = inp["moll_vsup"] * math.sqrt(2 / math.pi) / p["sigma"]
        s1 = 2 * p["xi"] / (math.sqrt(2 * math.pi) * p["sigma"])
        inner = tv_product_bound((inp["moll_vsup"], inp["moll_vtv"]), (s1 ** d, (3 * s1) ** d), d) * D
        sup_route = lip * g * D * norm0
        # convolution does not add variation: in 1d sum_j TV_j <= TV(V), so
        # sum_j TV_j^2 <= min(lip h, TV(V)) TV(V)
        vtv = inp["moll_vtv"]
        if d == 1:
            l2_route = consts["psi_sup"][0] * math.sqrt(h * min(lip * h, vtv) * vtv) * D
        else:
            l2_route = consts["psi_sup"][0] * h ** (d / 2) * vtv * math.sqrt(cells) * D
        e_static += min(sup_route, l2_route) + (inner + rnd) * norm0
    if inp["sing"]:
        sup_route = inp["sing_K"] * (1 + 2.02 / p["delta"]) * g * D * norm0
        l2_route = consts["psi_sup"][0] * h ** (d / 2) * inp["sing_variation"] * D * (
            1.0 if d == 1 else math.sqrt(cells))
        e_static += min(sup_route, l2_route) + rnd * norm0
    e_vcon = (inp["vcon_lip"] * g * D + rnd) * norm0 if inp["u_sup"] > 0 else 0.0
    total = consts["C_int"][0] * (e_state + T * (e_static + inp["u_sup"] * e_vcon))
    return dict(state=e_state, static=e_static, vcon=e_vcon, total=total, discrepancy=D)


def inequalities(b: ErrorBudget) -> list:
    """(name, lhs, rhs) for every share; the budget is sound iff lhs <= rhs for all."""
    p, inp, c, sh = b.params, b.inputs, b.constants_used, b.shares
    T, d = inp["T"], inp["d"]
    out = []
    if inp["family"] == Family.LATTICE_NLS.value:
        n = p["R"]
        out.append(("truncation", c["C_lattice"][0] * inp["A"] * (1 + n * n) ** (-inp["s"] / 8),
                    sh["truncation"]))
    else:
        rule = RadiusRule(inp["radius_rule"])
        lhs = radius_lhs(p["R"], rule, inp["C_eff"], c["C_T"][0], c["D1"][0], inp["eta"])
        out.append(("truncation", lhs, sh["truncation"]))
        out.append(("grid", c["C_grid"][0] * p["h"], sh["grid"]))
        out.append(("grid.cells", float(p["cells"]), float(inp["max_cells"])))
        out.append(("integration", integration_error(inp, p, c)["total"], sh["integration"]))
    if inp["sing"]:
        out.append(("excision", T * c["C_int"][0] * c["psi_sup"][0] * p["excision_eps"], sh["excision"]))
    if inp["moll"]:
        k = c["C_int"][0] * T * c["psi_sup"][0]
        lhs = k * (c["C_moll"][0] * p["sigma"] ** inp["moll_eps"] * inp["moll_w"]
                   + inp["moll_vsup"] * (2 * p["R"] + 2) ** (d / inp["moll_p"])
                   * gaussian_tail_mass(p["sigma"], p["xi"], d))
        out.append(("mollification", lhs, sh["mollification"]))
    if inp["hermite"]:
        K = p["hermite_K"]
        tail = inp["herm_C"] / (2 * K + 1) ** inp["herm_eps"]
        coef = math.sqrt(K) * hermite_integration_bound(K, p["R"], inp["omega_R"], p["hermite_N"],
                                                        inp["h_eta"])
        out.append(("hermite", c["C_int"][0] * (tail + coef), sh["hermite"]))
    tau = p["tau"]
    cn = T * c["C_cn"][0] * tau ** 2 / p["h"] ** inp["cn_power"] if inp["family"] != Family.LATTICE_NLS.value else 0.0
    out.append(("time", max(cn, c["C_split"][0] * T * tau ** 2), sh["time"]))
    out.append(("time.steps", abs(p["steps"] * tau - T), 1e-12 * T))
    if inp["has_phase"]:
        out.append(("time.phase_range", tau * inp["phase_rate"], c["phase_range"][0]))
        rem = remainder_bound(p["K"], c["phase_range"][0])
        out.append(("exponential", c["C_int"][0] * p["steps"] * inp["norm0"] * rem, sh["exponential"]))
    out.append(("shares", sum(sh.values()), b.epsilon * (1 + 1e-12)))
    return out


def replay(b: ErrorBudget) -> list:
    """Names of violated inequalities (empty list: the ledger checks out)."""
    return [name for name, lhs, rhs in inequalities(b) if not lhs <= rhs]


# -- planning ----------------------------------------------------------------------------

def _first_dyadic(pred, start=0, what="parameter"):
    for k in range(start, LADDER + 1):
        if pred(k):
            return k
    raise BudgetInfeasible(f"no dyadic {what} satisfies its inequality", what)


def plan(problem: ProblemSpec, state: InitialState, pot: Optional[PotentialModel], eps: float,
         constants: Optional[BudgetConstants] = None, lattice: Optional[dict] = None) -> ErrorBudget:
    if not eps > 0:
        raise ConfigError("eps must be positive")
    pot = pot or PotentialModel()
    consts = constants or BudgetConstants()
    if problem.family is Family.LATTICE_NLS:
        return _plan_lattice(problem, state, eps, consts, lattice or {})
    if consts.M > 52:
        raise ConfigError("M is capped at 52")
    d, T = problem.dimension, problem.horizon
    nls = problem.family is Family.DEFOCUSING_NLS
    hermite = state.sobolev_bound[0] == "S^eps"
    moll = pot.w_reg is not None and pot.w_reg.smoothness is None
    sing = pot.w_sing is not None
    has_phase = pot.has_phase or nls
    if moll and pot.w_eps_p_control is None:
        raise ConfigError("rough potential needs a W^{eps,p} control")
    active = ["truncation", "grid", "time", "integration"]
    active += ["excision"] * sing + ["mollification"] * moll + ["hermite"] * hermite
    active += ["exponential"] * has_phase
    share = eps / len(active)
    shares = {k: (share if k in active else 0.0) for k in SOURCES}

    sobolev = state.sobolev_bound[1]
    c = _resolve(consts, problem, state, pot, sobolev)
    C_T, C_int, psi_sup = c["C_T"][0], c["C_int"][0], c["psi_sup"][0]
    eta, C0 = state.h_eta if state.h_eta is not None else (1.0, state.norm_bound)
    norm0 = state.norm_bound
    u_sup = pot.u.sup if pot.u is not None else 0.0
    inp = dict(family=problem.family.value, d=d, T=T, mu=problem.mu, sigma=problem.sigma or 0,
               eta=float(eta), C0=float(C0), norm0=float(norm0), radius_rule=consts.radius_rule,
               max_cells=consts.max_cells, hermite=hermite, moll=moll, sing=sing, has_phase=has_phase,
               u_sup=float(u_sup), grad_bound=state.grad_bound, cn_power=6 if nls else 4,
               h_eta=state.h_eta)
    params = dict(M=consts.M)
    records = {}

    # truncation: the smooth cutoff keeps [-R/2, R/2]^d, hence the 2^eta on the initial tail
    rule = RadiusRule(consts.radius_rule)
    C_eff = c["C1"][0] + C0 * 2 ** eta
    inp["C_eff"] = C_eff
    kR = _first_dyadic(lambda k: radius_lhs(2.0 ** k, rule, C_eff, C_T, c["D1"][0], eta) <= share,
                       what="truncation")
    R = 2.0 ** kR
    params["R"] = R
    inp["omega_R"] = float(state.clbbv(R))

    if sing:
        eps_f = share / (T * C_int * psi_sup)
        delta, K = pot.w_sing.blowup_control(eps_f, R)
        if not delta > 0:
            raise ConfigError(f"blow-up control returned non-positive delta {delta}")
        params.update(excision_eps=eps_f, delta=float(delta))
        inp["sing_K"] = float(K)
        var = pot.w_sing.variation
        inp["sing_variation"] = float(var(delta, R)) if var is not None else math.inf

    if moll:
        e_reg, p_exp = pot.eps_p
        w = float(pot.w_eps_p_control(R + 1))
        vsup = float(pot.global_bound)
        inp.update(moll_eps=e_reg, moll_p=p_exp, moll_w=w, moll_vsup=vsup,
                   moll_vtv=float(pot.w_reg.variation(R)) if pot.w_reg.variation else 2 * vsup)
        k0 = C_int * T * psi_sup
        ks = _first_dyadic(lambda k: k0 * c["C_moll"][0] * 2.0 ** (-k * e_reg) * w <= share / 2,
                           what="mollification")
        sigma = 2.0 ** -ks
        box = (2 * R + 2) ** (d / p_exp)
        j = 1
        while k0 * vsup * box * gaussian_tail_mass(sigma, j * sigma, d) > share / 2:
            j += 1
            if j > 1000:
                raise BudgetInfeasible("mollifier cutoff unreachable", "mollification")
        params.update(sigma=sigma, xi=j * sigma)

    if hermite:
        e_h, C_h = state.eps_reg, state.sobolev_bound[1]
        inp.update(herm_C=float(C_h), herm_eps=float(e_h))
        Kh = hermite_order(C_h, e_h, share / (2 * C_int))
        kN = _first_dyadic(lambda k: math.sqrt(Kh) * hermite_integration_bound(
            Kh, R, inp["omega_R"], 2 ** k, state.h_eta) <= share / (2 * C_int), start=1, what="hermite")
        params.update(hermite_K=Kh, hermite_N=2 ** kN)
        sobolev = c["d4"][0] * (2 * max(Kh, 1) - 1) ** (2 - e_h) * C_h
        c = _resolve(consts, problem, state, pot, sobolev)  # grid constants see the smoothed state

    # grid
    C_grid = c["C_grid"][0]
    km = _first_dyadic(lambda k: C_grid * 2.0 ** -k <= share, what="grid")
    m = 2 ** km
    h = 1.0 / m
    cells = int(round(2 * R * m)) ** d
    params.update(h=h, m=m, cells=cells)
    if cells > consts.max_cells:
        raise BudgetInfeasible(f"grid needs {cells} cells (max {consts.max_cells})", "grid")

    # time step
    if pot.v_con is not None:
        inp["vcon_lip"] = float(pot.v_con.smoothness(R))
    else:
        inp["vcon_lip"] = 0.0
    rate = u_sup * inp["vcon_lip"] + (psi_sup ** (problem.sigma - 1) if nls else 0.0)
    inp["phase_rate"] = rate
    cnp = inp["cn_power"]

    def time_ok(tau, which=None):
        checks = {"cn": T * c["C_cn"][0] * tau ** 2 / h ** cnp <= share,
                  "split": c["C_split"][0] * T * tau ** 2 <= share,
                  "phase_range": (not has_phase) or tau * rate <= c["phase_range"][0]}
        return checks if which else all(checks.values())

    kt = _first_dyadic(lambda k: time_ok(2.0 ** -k), what="time")
    steps = int(math.ceil(T / 2.0 ** -kt - 1e-9))
    tau = T / steps
    params.update(tau=tau, steps=steps)
    records["time.binding"] = ",".join(sorted(k for k, ok in time_ok(2 * tau, True).items() if not ok)) or "none"

    # exponential
    if has_phase:
        params["K"] = choose_k(share / (C_int * steps * max(norm0, 1e-300)), c["phase_range"][0])
    else:
        params["K"] = 0

    # integration
    inp["static_lip"] = (float(pot.w_reg.smoothness(R)) if pot.w_reg is not None and not moll else None)
    prm = dict(params)

    def int_ok(k):
        prm["N"] = 2 ** k
        return integration_error(inp, prm, c)["total"] <= share

    kN = _first_dyadic(int_ok, start=1, what="integration")
    if 2 ** kN > N_MAX:
        raise BudgetInfeasible(f"integration needs N = 2^{kN}", "integration")
    params["N"] = 2 ** kN
    records["M.residual"] = params["N"] * 2.0 ** (-consts.M)
    b = ErrorBudget(eps, shares, params, c, inp, records)
    bad = replay(b)
    if bad:
        raise BudgetInfeasible(f"plan violates {bad}", bad[0])
    return b


def _plan_lattice(problem, state, eps, consts, lattice):
    from .lattice import choose_lattice_radius

    T = problem.horizon
    c = {"C_lattice": (consts.C_lattice if consts.C_lattice is not None else 1.0,
                       "pinned" if consts.C_lattice is not None else "default"),
         "C_split": (consts.C_split if consts.C_split is not None else 1.0,
                     "pinned" if consts.C_split is not None else "heuristic"),
         "C_int": (consts.C_int if consts.C_int is not None else 1.0,
                   "pinned" if consts.C_int is not None else "heuristic"),
         "psi_sup": (consts.psi_sup if consts.psi_sup is not None else 1.0,
                     "pinned" if consts.psi_sup is not None else "heuristic"),
         "phase_range": (float(consts.phase_range), "default")}
    s = float(lattice.get("s", 4.0))
    A = float(lattice.get("A", state.h_eta[1] if state.h_eta else state.norm_bound))
    active = ["truncation", "time", "exponential"]
    share = eps / len(active)
    shares = {k: (share if k in active else 0.0) for k in SOURCES}
    n = choose_lattice_radius(A, s, share, c["C_lattice"][0])
    rate = c["psi_sup"][0] ** (problem.sigma - 1)
    kt = _first_dyadic(lambda k: c["C_split"][0] * T * 4.0 ** -k <= share
                       and 2.0 ** -k * rate <= c["phase_range"][0], what="time")
    steps = int(math.ceil(T / 2.0 ** -kt - 1e-9))
    tau = T / steps
    norm0 = state.norm_bound
    K = choose_k(share / (c["C_int"][0] * steps * max(norm0, 1e-300)), c["phase_range"][0])
    params = dict(R=n, h=1.0, m=1, cells=(2 * n + 1) ** problem.dimension, tau=tau, steps=steps, K=K,
                  N=1, M=consts.M)
    inp = dict(family=problem.family.value, d=problem.dimension, T=T, s=s, A=A, norm0=norm0,
               has_phase=True, phase_rate=rate, sing=False, moll=False, hermite=False)
    b = ErrorBudget(eps, shares, params, c, inp, {})
    bad = replay(b)
    if bad:
        raise BudgetInfeasible(f"plan violates {bad}", bad[0])
    return b


def uniform_runtime_estimate(b: ErrorBudget, n_fields: Optional[int] = None) -> int:
    """Arithmetic operation count determined by the budget alone.

    ops = cells * steps * (2 s_d + [phase] (4K + 10)) + N * cells * n_fields
    with s_1 = 30 per cell for the banded sweep and s_d = 8 n^{d-1} for the
    banded factor in d >= 2 (n cells per axis); n_fields counts the sampled
    inputs (state, static potential, V_con) plus N_moll-point inner averages.
    """
    p, inp = b.params, b.inputs
    d = inp["d"]
    cells = int(p["cells"])
    if d == 1:
        solve = SOLVE_OPS_1D
    else:
        n = round(cells ** (1.0 / d))
        solve = SOLVE_OPS_BANDED * n ** (d - 1)
    phase = PHASE_OPS_BASE + PHASE_OPS_PER_K * p["K"] if inp["has_phase"] else 0
    ops = cells * p["steps"] * (2 * solve + phase)
    if n_fields is None:
        n_fields = 1 + int(inp.get("static_lip") is not None or inp["sing"]) + int(inp.get("u_sup", 0) > 0)
        if inp["moll"]:
            n_fields += p["N"]  # each mollified sample is itself an N-point average
    if inp["family"] != Family.LATTICE_NLS.value:
        ops += p["N"] * cells * n_fields
    return int(ops)
