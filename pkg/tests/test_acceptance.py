"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run on its own with ``pytest tests/test_acceptance.py -v`` (the lines are
printed with output capture disabled) or ``python tests/test_acceptance.py``.
"""
import math
import sys
from functools import lru_cache

import numpy as np
import pytest

from schrocert.budget import BudgetConstants, plan, replay
from schrocert.core import GridFunction, tail_bound, weighted_tail_norm
from schrocert.fdm import convergence_study, laplacian_h
from schrocert.lattice import LatticeState, from_sampler, lattice_strang, truncation_study
from schrocert.pipeline import demo_blowup, l2_error, solve
from schrocert.problems import BUILTINS, builtin, gaussian_state
from schrocert.propagate import DiscretePotential, SplitScheme, choose_k, exp_k, strang_linear, strang_nls
from schrocert.qmc import (HaltonConfig, certificate, cubic_discretize, first_primes, halton_points,
                           kh_error_bound, star_discrepancy_brute)

from oracles import dense_laplacian, exact_flow

EPS = (2.0 ** -2, 2.0 ** -3, 2.0 ** -4)
COHERENT_EPS = (2.0 ** -2, 2.0 ** -3)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


@lru_cache(maxsize=None)
def pinned_run(name, eps):
    b = builtin(name)
    res = solve(b.problem, b.state, b.potential, eps, BudgetConstants(**b.pinned), lattice=b.lattice)
    return b, res


def _acceptance_runs():
    runs = [pinned_run("free-gaussian", e) for e in EPS]
    runs += [pinned_run("coherent-field", e) for e in COHERENT_EPS]
    runs += [pinned_run(n, 0.125) for n in ("defocusing-cubic", "singular-root", "coherent-field-sin")]
    return runs


# 1 -------------------------------------------------------------------------------------

def test_criterion_01_unitarity(report):
    drifts = {f"{b.name}@{r.budget.epsilon:g}": r.trajectory.cayley_drift for b, r in _acceptance_runs()}
    worst = max(drifts, key=drifts.get)
    ok = max(drifts.values()) <= 1e-10
    report(1, ok, f"max per-step Cayley drift {drifts[worst]:.2e} ({worst}) over {len(drifts)} runs <= 1e-10")
    assert ok


# 2 -------------------------------------------------------------------------------------

def test_criterion_02_cn_order(report):
    R, m = 8, 8  # 128 cells
    n = 2 * R * m
    x = -R + (np.arange(n) + 0.5) / m
    psi0 = np.pi ** -0.25 * np.exp(-x ** 2 / 2 + 1j * x)
    g = GridFunction(R, m, 1, psi0)
    V = 0.5 * np.cos(x)
    ex = exact_flow(-dense_laplacian(n, 1 / m) + np.diag(V), psi0, 1.0)
    taus = [1 / 8 / 2 ** j for j in range(5)]
    errs = []
    for tau in taus:
        steps = int(round(1 / tau))
        tr = strang_linear(g, SplitScheme("linear", tau, 0), DiscretePotential(V), steps)
        errs.append(math.sqrt(1 / m) * np.linalg.norm(tr.snapshots[-1] - ex))
    order = np.polyfit(np.log(taus), np.log(errs), 1)[0]
    ok = order >= 1.9
    report(2, ok, f"empirical order {order:.3f} >= 1.9 (errors {errs[0]:.2e} .. {errs[-1]:.2e})")
    assert ok


# 3 -------------------------------------------------------------------------------------

def test_criterion_03_coherent_state(report):
    b, res = pinned_run("coherent-field", 2.0 ** -3)
    err = l2_error(res, b.exact)
    R, m, _ = res.trajectory.grid
    h = 1 / m
    x = -R + (np.arange(int(2 * R * m)) + 0.5) * h
    dens = np.abs(res.trajectory.snapshots[-1]) ** 2
    xc = b.exact.center(1.0)
    off = x[int(np.argmax(dens))] - xc
    ok_err, ok_arg = err <= 5e-2, abs(off) <= 2 * h
    report(3, ok_err and ok_arg,
           f"eps 1/8, R {R:g}, h 2^-{int(math.log2(m))}: L2 error {err:.4f} <= 5e-2 [{'ok' if ok_err else 'no'}]; "
           f"|argmax - x_c| {abs(off):.2e} <= 2h {2 * h:.2e} [{'ok' if ok_arg else 'no'}]")
    assert ok_err
    assert ok_arg


# 4 -------------------------------------------------------------------------------------

def test_criterion_04_tail_law(report):
    worst = 0.0
    ok = True
    for d in (1, 2):
        for eta in (1.0, 2.0):
            st = gaussian_state(d, eta)
            m = 16 if d == 1 else 4
            g = cubic_discretize(st.sampler, (16, m), HaltonConfig(first_primes(d), 64))
            C = st.h_eta[1]
            for R0 in (2.0, 4.0, 8.0):
                lhs, rhs = weighted_tail_norm(g, eta, R0), C * R0 ** -eta
                ok &= lhs <= tail_bound(C, eta, R0) <= rhs
                worst = max(worst, lhs / rhs)
    report(4, ok, f"weighted tail <= C R0^-eta for d in (1,2), eta in (1,2), R0 in (2,4,8); max ratio {worst:.3f}")
    assert ok


# 5 -------------------------------------------------------------------------------------

def test_criterion_05_discrepancy(report):
    worst, ok = 0.0, True
    for d in (1, 2):
        bases = first_primes(d)
        for k in range(1, 13):
            N = 2 ** k
            D = star_discrepancy_brute(halton_points(bases, N))
            bound = certificate(bases, N).bound
            ok &= D <= bound
            worst = max(worst, D / bound)
    report(5, ok, f"brute D*_N <= c_star log(N)^d / N for d in (1,2), N = 2..4096; max ratio {worst:.3f}")
    assert ok


# 6 -------------------------------------------------------------------------------------

def _sine_sum(rng):
    a = rng.normal(size=4)
    w = rng.uniform(0.5, 6.0, size=4)
    ph = rng.uniform(0, 2 * math.pi, size=4)
    f = lambda p: np.sum(a * np.sin(np.outer(p[:, 0], w) + ph), axis=1)

    def mean(lo, hi):
        return np.sum(a * (np.cos(np.outer(lo, w) + ph) - np.cos(np.outer(hi, w) + ph)) / w, axis=1) / (hi - lo)

    return f, mean, float(np.sum(np.abs(a * w)))


def test_criterion_06_koksma_hlawka(report):
    rng = np.random.default_rng(2024)
    R, m = 2, 4
    h = 1 / m
    lo = -R + np.arange(2 * R * m) * h
    worst, ok = 0.0, True
    for _ in range(100):
        f, mean, lip = _sine_sum(rng)
        N = int(2 ** rng.integers(2, 11))
        g = cubic_discretize(f, (R, m), HaltonConfig((2,), N))
        tv = np.full(len(lo), lip * h)  # TV on a cell <= h sup|f'|
        linf, _ = kh_error_bound(tv, certificate((2,), N), 52, N, len(lo))
        err = np.abs(g.values.real - mean(lo, lo + h)).max()
        ok &= err <= linf
        worst = max(worst, err / linf)
    report(6, ok, f"100 random sine sums: cell-mean error <= KH bound; max ratio {worst:.3f}")
    assert ok


# 7 -------------------------------------------------------------------------------------

def test_criterion_07_fd_convergence(report):
    hs = [1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128]
    f = lambda x: np.exp(-x ** 2)
    lap = lambda x: (4 * x ** 2 - 2) * np.exp(-x ** 2)
    _, _, slope = convergence_study(f, lap, 2, hs)
    R, m = 4, 16
    x = -R + (np.arange(2 * R * m) + 0.5) / m
    q = GridFunction(R, m, 1, 3 * x ** 2 - x + 1)
    quad_err = float(np.abs(laplacian_h(q).values[2:-2] - 6).max())
    ok = slope >= 0.9 and quad_err <= 1e-12
    report(7, ok, f"L2 slope {slope:.3f} >= 0.9 over h = 1/8..1/128; interior quadratic error {quad_err:.1e} <= 1e-12")
    assert ok


# 8 -------------------------------------------------------------------------------------

def test_criterion_08_exp_k(report):
    ok, lines = True, []
    for eps in (1e-6, 1e-10):
        for r in (1.0, 5.0):
            K = choose_k(eps, r)
            x = np.linspace(-r, r, 1000)
            err = float(np.abs(exp_k(x, K) - np.exp(1j * x)).max())
            ok &= err <= eps
            lines.append(f"({eps:g},{r:g})->K={K} err {err:.1e}")
    report(8, ok, "; ".join(lines))
    assert ok


# 9 -------------------------------------------------------------------------------------

def test_criterion_09_defocusing(report):
    from schrocert.fdm import discrete_sobolev_norms

    R, m = 16, 32
    x = -R + (np.arange(2 * R * m) + 0.5) / m
    g = GridFunction(R, m, 1, np.pi ** -0.25 * np.exp(-x ** 2 / 2))
    tau = 0.01
    K = choose_k(1e-14, 1.25 * tau)
    tr = strang_nls(g, SplitScheme("nls", tau, K, 1.0, 3, 1, phase_range=1.25 * tau, phase_tol=1e-14), None, 100,
                    h1_stride=1)
    drift = max(abs(n / tr.norms[0] - 1) for n in tr.norms)
    h1_0 = discrete_sobolev_norms(g, check=False)[0]
    growth = max(tr.h1_norms) / h1_0
    ok = drift <= 1e-8 and growth <= 2
    report(9, ok, f"cubic, [-16,16], h=1/32, 100 steps: L2 drift {drift:.1e} <= 1e-8; max H1_h / initial {growth:.3f} <= 2")
    assert ok


# 10 ------------------------------------------------------------------------------------

def test_criterion_10_lattice(report):
    rng = np.random.default_rng(10)
    drifts = []
    for nu in (1, -1):
        v = rng.normal(size=33) + 1j * rng.normal(size=33)
        tr = lattice_strang(LatticeState(16, 1, v / np.linalg.norm(v)), nu, 3, 0.01, 1000, 12)
        drifts.append(max(abs(n / tr.norms[0] - 1) for n in tr.norms))
    v0 = from_sampler(lambda k: 1 / (1 + (k ** 2).sum(1)) ** 2, 48, 1, 4.0)
    study = truncation_study(v0, [4, 8, 16, 32])
    counts = set()
    for _ in range(10):
        v = rng.normal(size=(17, 17)) + 1j * rng.normal(size=(17, 17))
        v *= rng.uniform(0.1, 2) / np.linalg.norm(v)
        counts.add(tuple(sorted(lattice_strang(LatticeState(8, 2, v), 1, 3, 0.05, 20, 6).ops.items())))
    ok = max(drifts) <= 1e-8 and study.monotone and len(counts) == 1
    report(10, ok, f"drift nu=+1 {drifts[0]:.1e}, nu=-1 {drifts[1]:.1e} <= 1e-8; truncation errors "
                   f"{', '.join(f'{e:.1e}' for e in study.errors)} monotone={study.monotone}; "
                   f"{len(counts)} distinct op count(s) over 10 inputs")
    assert ok


# 11 ------------------------------------------------------------------------------------

def test_criterion_11_blowup(report):
    rep = demo_blowup()
    ok = rep.exact_ratio >= 3 and rep.numerical_ratio < rep.exact_ratio / 2
    report(11, ok, f"exact ratio t=9 -> 9.9 {rep.exact_ratio:.4f} >= 3; numerical {rep.numerical_ratio:.4f} "
                   f"< {rep.exact_ratio / 2:.4f}")
    assert ok


# 12 ------------------------------------------------------------------------------------

def test_criterion_12_budget(report):
    bad, nonmono = [], []
    for name in sorted(BUILTINS):
        b = builtin(name)
        buds = [plan(b.problem, b.state, b.potential, e, BudgetConstants(**b.pinned), b.lattice) for e in EPS]
        bad += [f"{name}@{x.epsilon:g}" for x in buds if replay(x)]
        for x, y in zip(buds, buds[1:]):
            for k in ("R", "m", "steps", "N", "K", "hermite_K", "hermite_N"):
                if k in x.params and y.params[k] < x.params[k]:
                    nonmono.append(f"{name}.{k}")
            for k in ("tau", "h", "sigma"):
                if k in x.params and y.params[k] > x.params[k]:
                    nonmono.append(f"{name}.{k}")
    errs = {}
    for e in EPS:
        b, r = pinned_run("free-gaussian", e)
        errs[f"free-gaussian@{e:g}"] = (l2_error(r, b.exact), e)
    for e in COHERENT_EPS:
        b, r = pinned_run("coherent-field", e)
        errs[f"coherent-field@{e:g}"] = (l2_error(r, b.exact), e)
    over = [k for k, (err, e) in errs.items() if err > e]
    ok = not bad and not nonmono and not over
    report(12, ok, f"replay clean on {len(BUILTINS)} builtins x 3 eps (violations: {bad or 'none'}); "
                   f"monotone (exceptions: {nonmono or 'none'}); end-to-end "
                   + ", ".join(f"{k} {err:.2e}" for k, (err, e) in errs.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
