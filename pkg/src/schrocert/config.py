"""INI run configurations.

Sections: [problem] [state] [potential] [accuracy] [constants] [output].
Values are numbers, expressions of the expression language, or small tables
written "key: value, key: value".
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .budget import BudgetConstants
from .core import (ConfigError, ControlFunction, Family, InitialState, PotentialModel, ProblemSpec,
                   RegularPart, SingularPart)
from .problems import builtin


@dataclass(frozen=True)
class StepTable:
    """Non-decreasing step map R -> value at the smallest key >= R ('inf' allowed)."""

    keys: tuple
    values: tuple

    def __post_init__(self):
        if list(self.keys) != sorted(self.keys):
            raise ConfigError("table keys must be increasing")
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("table values must be non-decreasing")

    def __call__(self, R):
        for k, v in zip(self.keys, self.values):
            if R <= k:
                return v
        raise ConfigError(f"table does not cover R = {R}; add an 'inf' entry")


def parse_table(text: str) -> StepTable:
    pairs = []
    for item in text.replace(";", ",").split(","):
        if not item.strip():
            continue
        try:
            k, v = item.split(":")
            pairs.append((float(k), float(v)))
        except ValueError:
            raise ConfigError(f"bad table entry {item.strip()!r} (expected key: value)") from None
    pairs.sort()
    return StepTable(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))


def _scalar_or_table(text):
    try:
        v = float(text)
        return lambda R: v
    except ValueError:
        return parse_table(text)


def parse_control_table(text: str):
    """'eps: delta K; ...' -> f(eps, R) picking the least demanding entry with key <= eps."""
    rows = []
    for item in text.split(";"):
        if not item.strip():
            continue
        try:
            k, rest = item.split(":")
            delta, K = rest.split()
            rows.append((float(k), float(delta), float(K)))
        except ValueError:
            raise ConfigError(f"bad control entry {item.strip()!r} (expected eps: delta K)") from None
    rows.sort()

    def f(eps, R):
        ok = [r for r in rows if r[0] <= eps]
        if not ok:
            raise ConfigError(f"singularity control table has no entry for eps <= {eps:.3e}")
        return ok[-1][1], ok[-1][2]

    return f


@dataclass
class RunConfig:
    problem: ProblemSpec
    state: InitialState
    potential: PotentialModel
    eps: float
    constants: BudgetConstants
    pinned: dict = field(default_factory=dict)
    builtin: Optional[str] = None
    output: Optional[str] = None
    stride: int = 0
    lattice: Optional[dict] = None

    def budget_constants(self, pin: bool) -> BudgetConstants:
        """Constants for planning; with pin, builtin calibrations (or all ones) sit under the overrides."""
        overrides = {k: v for k, v in vars(self.constants).items()
                     if v is not None and v != getattr(BudgetConstants(), k)}
        if not pin:
            return self.constants
        base = BudgetConstants(**self.pinned) if self.pinned else BudgetConstants.unit()
        return base.override(**overrides)


def _num(sec, key, default=None, cast=float):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing [{sec.name}] {key}")
        return default
    try:
        return cast(sec[key])
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {sec[key]!r} is not a number") from None


def _expr(sec, key, d):
    try:
        return ex.parse(sec[key], d)
    except ex.ExprSyntaxError as err:
        raise ConfigError(f"[{sec.name}] {key}: {err}") from None


def _points(text, d):
    pts = []
    for item in text.split(";"):
        if item.strip():
            pts.append([float(v) for v in item.split(",")])
    arr = np.array(pts, dtype=float).reshape(-1, d)
    return arr


def load(path: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return from_parser(cp)


def loads(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(str(err)) from None
    return from_parser(cp)


def from_parser(cp) -> RunConfig:
    for s in ("problem", "accuracy"):
        if s not in cp:
            raise ConfigError(f"missing section [{s}]")
    P = cp["problem"]
    name = P.get("builtin")
    bi = builtin(name) if name else None
    if bi is not None:
        problem, state, pot = bi.problem, bi.state, bi.potential
        pinned, lattice = dict(bi.pinned), bi.lattice
    else:
        fam = P.get("family", "linear")
        try:
            family = Family(fam)
        except ValueError:
            raise ConfigError(f"unknown family {fam!r}") from None
        sigma = P.get("sigma")
        problem = ProblemSpec(family, _num(P, "dimension", 1, int), _num(P, "horizon", 1.0),
                              _num(P, "mu", 1.0), int(sigma) if sigma else None, _num(P, "nu", 1, int))
        state = _state(cp, problem.dimension)
        pot = _potential(cp, problem)
        pinned, lattice = {}, None
        if family is Family.LATTICE_NLS:
            lattice = dict(width=_num(P, "lattice_width", 1.0), s=_num(P, "lattice_s", 4.0))
    eps = _num(cp["accuracy"], "eps")
    if not eps > 0:
        raise ConfigError("eps must be positive")
    consts = BudgetConstants()
    if "constants" in cp:
        kw = {}
        for k, v in cp["constants"].items():
            if k == "radius_rule":
                kw[k] = v
            elif k in ("max_cells", "M"):
                kw[k] = int(v)
            else:
                try:
                    kw[k] = float(v)
                except ValueError:
                    raise ConfigError(f"[constants] {k} = {v!r} is not a number") from None
        consts = consts.override(**kw)
    out = cp["output"] if "output" in cp else {}
    return RunConfig(problem, state, pot, eps, consts, pinned, name, out.get("path"),
                     int(out.get("stride", 0)), lattice)


def _state(cp, d) -> InitialState:
    if "state" not in cp:
        raise ConfigError("missing section [state]")
    S = cp["state"]
    if "builtin" in S:
        return builtin(S["builtin"]).state
    re_e = _expr(S, "re", d)
    im_e = _expr(S, "im", d) if "im" in S else None
    sampler = ex.complex_sampler(re_e, im_e)
    omega = parse_table(S["omega"]) if "omega" in S else None
    if omega is None:
        raise ConfigError("[state] needs an omega table (sup + variation per box radius)")
    h_eta = None
    if "eta" in S:
        h_eta = (_num(S, "eta"), _num(S, "h_eta"))
    grad = _num(S, "grad_bound") if "grad_bound" in S else None
    l2 = _num(S, "l2_bound") if "l2_bound" in S else None
    return InitialState(sampler, (S.get("space", "H2+eps_2"), _num(S, "C")), _num(S, "eps", 1.0), omega,
                        d, grad_bound=grad, h_eta=h_eta, l2_bound=l2, name="config")


def _potential(cp, problem) -> PotentialModel:
    if "potential" not in cp:
        return PotentialModel()
    V = cp["potential"]
    d = problem.dimension
    w_reg = v_con = u = w_sing = None
    kw = {}
    if "w_reg" in V:
        e = _expr(V, "w_reg", d)
        smp = (lambda p, t=0.0, _e=e: ex.evaluate_array(_e, p))
        if V.get("w_reg_rough", "no").lower() in ("yes", "true", "1"):
            w_reg = RegularPart(smp, None)
            kw["w_eps_p_control"] = _scalar_or_table(V["w_reg_wep"]) if "w_reg_wep" in V else None
            if "eps_p" in V:
                a, b = (float(x) for x in V["eps_p"].split(","))
                kw["eps_p"] = (a, b)
        else:
            if "w_reg_lip" not in V:
                raise ConfigError("[potential] w_reg needs w_reg_lip (or w_reg_rough = yes)")
            w_reg = RegularPart(smp, _scalar_or_table(V["w_reg_lip"]))
    if "v_con" in V:
        e = _expr(V, "v_con", d)
        if "v_con_lip" not in V:
            raise ConfigError("[potential] v_con needs v_con_lip")
        v_con = RegularPart(lambda p, t=0.0, _e=e: ex.evaluate_array(_e, p), _scalar_or_table(V["v_con_lip"]))
        if "u" not in V:
            raise ConfigError("[potential] v_con needs a control u")
    if "u" in V:
        ue = _expr(V, "u", d)
        fn = ex.time_function(ue)
        bps = tuple(float(x) for x in V.get("u_breakpoints", f"0, {problem.horizon}").split(","))
        probe = ControlFunction(fn, bps, math.inf, 0.0)
        w11 = _num(V, "u_w11") if "u_w11" in V else sum(probe.piece_norms()) * (1 + 1e-6)
        if "u_sup" in V:
            sup = _num(V, "u_sup")
        else:
            ts = np.linspace(bps[0], bps[-1], 4097)
            sup = float(max(abs(fn(t)) for t in ts)) * (1 + 1e-6)
        u = ControlFunction(fn, bps, w11, sup)
    if "sing_expr" in V:
        e = _expr(V, "sing_expr", d)
        pts = _points(V.get("singularities", ",".join(["0"] * d)), d)
        if "sing_control" not in V:
            raise ConfigError("[potential] sing_expr needs a sing_control table")
        var = None
        if "sing_variation" in V:
            tv = float(V["sing_variation"])
            var = lambda delta, R: tv
        w_sing = SingularPart(lambda p, t=0.0, _e=e: _sing_eval(_e, p), pts, _num(V, "sing_p", 2.0),
                              parse_control_table(V["sing_control"]), _num(V, "sing_gap", 1.0), var)
    return PotentialModel(w_sing=w_sing, w_reg=w_reg, v_con=v_con, u=u,
                          global_bound=_num(V, "global_bound", 0.0), **kw)


def _sing_eval(e, p):
    # the excision cutoff only ever asks for points away from the singularities
    return ex.evaluate_array(e, p)
