import dataclasses
from pathlib import Path

import numpy as np
import pytest

from schrocert.budget import (SOURCES, BudgetConstants, ErrorBudget, inequalities, plan, replay,
                              uniform_runtime_estimate)
from schrocert.core import BudgetInfeasible, ConfigError
from schrocert.problems import BUILTINS, builtin, gaussian_state

GOLDEN = Path(__file__).parent / "golden"
EPS = (2.0 ** -2, 2.0 ** -3, 2.0 ** -4)


def _plan(name, eps, consts=None):
    b = builtin(name)
    c = consts if consts is not None else BudgetConstants(**b.pinned)
    return plan(b.problem, b.state, b.potential, eps, c, b.lattice)


def test_golden_free_gaussian_unit_constants():
    b = _plan("free-gaussian", 2 ** -4, BudgetConstants.unit())
    assert b.serialize() == GOLDEN.joinpath("free_gaussian_unit_eps4.txt").read_text().splitlines()


def test_free_gaussian_unit_params_by_hand():
    # four active shares of 1/64; h from h <= 1/64, tau from tau^2 / h^4 <= 1/64
    b = _plan("free-gaussian", 2 ** -4, BudgetConstants.unit())
    p = b.params
    assert b.shares["grid"] == 2 ** -6
    assert (p["R"], p["m"], p["tau"], p["steps"], p["N"], p["K"]) == (8.0, 64, 2.0 ** -15, 32768, 64, 0)
    assert p["cells"] == 2 * 8 * 64


@pytest.mark.parametrize("name", sorted(BUILTINS))
@pytest.mark.parametrize("eps", EPS)
def test_replay_clean_on_builtins(name, eps):
    b = _plan(name, eps)
    assert replay(b) == []
    assert sum(b.shares.values()) <= eps * (1 + 1e-12)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_eps_monotonicity(name):
    bs = [_plan(name, e) for e in EPS]
    for a, b in zip(bs, bs[1:]):
        for k in ("R", "m", "cells", "steps", "N", "K", "hermite_K", "hermite_N"):
            if k in a.params:
                assert b.params[k] >= a.params[k], k
        for k in ("tau", "h", "sigma", "excision_eps"):
            if k in a.params:
                assert b.params[k] <= a.params[k], k


def test_inactive_shares_are_zero():
    b = _plan("free-gaussian", 0.25)
    active = {k for k, v in b.shares.items() if v > 0}
    assert active == {"truncation", "grid", "time", "integration"}
    assert all(b.shares[k] == 0 for k in SOURCES if k not in active)
    assert len({b.shares[k] for k in active}) == 1


def test_singular_and_rough_sources_active():
    assert _plan("singular-root", 0.25).shares["excision"] > 0
    assert _plan("rough-step", 0.25).shares["mollification"] > 0
    assert _plan("rough-hermite", 0.25).shares["hermite"] > 0
    assert _plan("coherent-field", 0.25).shares["exponential"] > 0


def _tampered(b, **params):
    return ErrorBudget(b.epsilon, dict(b.shares), {**b.params, **params}, b.constants_used, b.inputs,
                       b.records)


def test_replay_flags_doubled_tau():
    b = _plan("free-gaussian", 2 ** -4, BudgetConstants.unit())
    bad = replay(_tampered(b, tau=2 * b.params["tau"]))
    assert "time" in bad


def test_replay_flags_halved_N():
    b = _plan("free-gaussian", 2 ** -4, BudgetConstants.unit())
    assert "integration" in replay(_tampered(b, N=b.params["N"] // 2))


def test_replay_flags_inflated_shares():
    b = _plan("free-gaussian", 0.25)
    sh = dict(b.shares, grid=b.shares["grid"] * 2)
    assert "shares" in replay(ErrorBudget(b.epsilon, sh, b.params, b.constants_used, b.inputs))


def test_inequalities_named_and_finite():
    for name, lhs, rhs in inequalities(_plan("coherent-field", 0.25)):
        assert isinstance(name, str) and np.isfinite(lhs) and np.isfinite(rhs)


def test_plan_never_samples():
    st = gaussian_state(1, 4.0)

    def boom(pts):
        raise AssertionError("plan sampled the state")

    b = builtin("free-gaussian")
    bb = plan(b.problem, dataclasses.replace(st, sampler=boom), b.potential, 0.25, BudgetConstants(**b.pinned))
    assert replay(bb) == []


def test_runtime_estimate_ignores_sampler():
    b = builtin("free-gaussian")
    st = b.state
    other = dataclasses.replace(st, sampler=lambda p: 2 * st.sampler(p))
    c = BudgetConstants(**b.pinned)
    b1 = plan(b.problem, st, b.potential, 0.125, c)
    b2 = plan(b.problem, other, b.potential, 0.125, c)
    assert b1.serialize() == b2.serialize()
    assert uniform_runtime_estimate(b1) == uniform_runtime_estimate(b2)


def test_runtime_estimate_monotone_in_eps():
    for name in ("free-gaussian", "coherent-field", "defocusing-cubic", "lattice-gaussian"):
        ops = [uniform_runtime_estimate(_plan(name, e)) for e in EPS]
        assert ops == sorted(ops)


def test_runtime_estimate_formula():
    # d = 1, R = 16, h = 1/32 -> 1024 cells; 100 steps of 2 x 30 ops per cell, plus N = 16 samples
    b = _plan("free-gaussian", 0.25)
    p = dict(b.params, R=16.0, h=1 / 32, m=32, cells=1024, steps=100, tau=0.01, K=0, N=16)
    bb = ErrorBudget(b.epsilon, b.shares, p, b.constants_used, b.inputs)
    assert uniform_runtime_estimate(bb) == 1024 * 100 * 60 + 16 * 1024


def test_golden_runtime():
    b = _plan("free-gaussian", 2 ** -4, BudgetConstants.unit())
    assert uniform_runtime_estimate(b) == 1024 * 32768 * 60 + 64 * 1024


def test_max_cells_infeasible():
    with pytest.raises(BudgetInfeasible) as err:
        _plan("free-gaussian", 2 ** -4, BudgetConstants.unit(max_cells=100))
    assert err.value.share == "grid"


@pytest.mark.parametrize("eps", [0.0, -1.0, float("nan")])
def test_nonpositive_eps(eps):
    with pytest.raises(ConfigError):
        _plan("free-gaussian", eps)


def test_unknown_constant():
    with pytest.raises(ConfigError):
        BudgetConstants().override(C_bogus=1.0)


def test_default_constants_are_tagged():
    b = builtin("free-gaussian")
    bb = plan(b.problem, b.state, b.potential, 0.25, BudgetConstants())
    tags = {v[1] for v in bb.constants_used.values()}
    assert "pinned" not in tags
    assert replay(bb) == []


def test_serialize_deterministic():
    a = _plan("singular-root", 0.125).serialize()
    b = _plan("singular-root", 0.125).serialize()
    assert a == b
    assert a[0] == "epsilon = 0.125"
