import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from schrocert.core import ConfigError
from schrocert.lattice import (LatticeState, choose_lattice_radius, from_sampler, lattice_laplacian,
                               lattice_strang, laplacian_matrix, restrict, truncation_study, weighted_norm)


def _random_state(rng, n, d, scale=0.5):
    v = rng.normal(size=(2 * n + 1,) * d) + 1j * rng.normal(size=(2 * n + 1,) * d)
    return LatticeState(n, d, scale * v / np.linalg.norm(v))


def test_spike_pattern():
    v = np.zeros(9, dtype=complex)
    v[4] = 1
    out = lattice_laplacian(LatticeState(4, 1, v)).values
    assert out[3:6].tolist() == [1, -2, 1]
    assert np.count_nonzero(out) == 3


def test_spike_2d():
    v = np.zeros((5, 5), dtype=complex)
    v[2, 2] = 1
    out = lattice_laplacian(LatticeState(2, 2, v)).values.real
    assert out[2, 2] == -4 and out[1, 2] == out[3, 2] == out[2, 1] == out[2, 3] == 1
    assert np.count_nonzero(out) == 5


def test_zero_dirichlet_outside():
    v = np.zeros(5, dtype=complex)
    v[0] = 1
    assert lattice_laplacian(LatticeState(2, 1, v)).values[:2].tolist() == [-2, 1]


@pytest.mark.parametrize("d", [1, 2, 3])
def test_operator_norm_power_iteration(d):
    n = 6 if d < 3 else 3
    rng = np.random.default_rng(d)
    x = rng.normal(size=(2 * n + 1,) * d)
    lam = 0.0
    for _ in range(500):
        y = lattice_laplacian(LatticeState(n, d, x)).values.real
        lam = np.linalg.norm(y) / np.linalg.norm(x)
        x = y / np.linalg.norm(y)
    assert lam <= 4 * d
    assert lam > 4 * d * 0.8


def test_matrix_matches_stencil():
    rng = np.random.default_rng(0)
    v = _random_state(rng, 3, 2)
    L = laplacian_matrix(3, 2)
    assert np.allclose(L @ v.values.ravel(), lattice_laplacian(v).values.ravel(), atol=1e-14)


@given(st.integers(0, 2 ** 32 - 1))
def test_laplacian_symmetric(seed):
    rng = np.random.default_rng(seed)
    v, w = _random_state(rng, 4, 2, 1.0), _random_state(rng, 4, 2, 1.0)
    a = np.vdot(lattice_laplacian(v).values, w.values)
    b = np.vdot(v.values, lattice_laplacian(w).values)
    assert abs(a - b) <= 1e-12


def test_weighted_norm():
    v = np.zeros(5)
    v[4] = 1.0  # k = 2
    assert weighted_norm(2, 1, v, 1.5) == pytest.approx(5 ** 0.75, rel=1e-14)


def test_declared_bound_checked():
    with pytest.raises(ConfigError):
        LatticeState(1, 1, [0, 0, 1], s=1.0, A=1.0)


def test_choose_radius_example():
    # 4 <n>^{-1} <= 1/4 needs <n> >= 16: n = 8 gives sqrt(65) < 16, n = 16 works
    assert choose_lattice_radius(4.0, 4.0, 0.25) == 16
    assert choose_lattice_radius(1.0, 4.0, 1.0) == 1
    # <n>^{-1} <= 0.1 needs <n> >= 10: sqrt(65) falls short, n = 16 works
    assert choose_lattice_radius(1.0, 4.0, 0.1) == 16
    n = choose_lattice_radius(1.0, 8.0, 0.01)
    assert (1 + n * n) ** -1 <= 0.01 < (1 + (n // 2) ** 2) ** -1
    assert n == 16


@given(st.floats(0.1, 10), st.floats(0.5, 8), st.floats(1e-4, 0.5))
def test_choose_radius_monotone(A, s, share):
    assume(A * (1 + 4.0 ** 40) ** (-s / 8) <= share / 2)
    n1 = choose_lattice_radius(A, s, share)
    n2 = choose_lattice_radius(A, s, share / 2)
    assert n2 >= n1
    assert A * (1 + n1 * n1) ** (-s / 8) <= share


def test_choose_radius_rejects():
    with pytest.raises(ValueError):
        choose_lattice_radius(1.0, 0.0, 0.1)


def test_zero_trajectory():
    tr = lattice_strang(LatticeState(3, 1, np.zeros(7)), 1, 3, 0.1, 10, 6)
    assert all(np.all(s == 0) for s in tr.snapshots)


def test_single_site_phase():
    # n = 0: -Delta is the scalar 2, so each step is cay * phase * cay with scalar factors
    tr = lattice_strang(LatticeState(0, 1, [0.5]), 1, 3, 0.1, 10, 14)
    z = tr.snapshots[-1][0]
    assert abs(z) == pytest.approx(0.5, rel=1e-12)
    a = 0.025  # half of tau / 2
    cay = (1 - 1j * a * 2) / (1 + 1j * a * 2)
    step = cay * np.exp(-1j * 0.1 * 0.25) * cay
    assert z == pytest.approx(0.5 * step ** 10, abs=1e-12)


@pytest.mark.parametrize("nu", [1, -1])
def test_drift_1000_steps(nu):
    rng = np.random.default_rng(7)
    v0 = _random_state(rng, 16, 1, 1.0)
    tr = lattice_strang(v0, nu, 3, 0.01, 1000, 12)
    assert tr.max_drift <= 1e-8
    assert abs(tr.norms[-1] / tr.norms[0] - 1) <= 1e-8


def test_op_count_uniform():
    rng = np.random.default_rng(3)
    counts = set()
    for _ in range(10):
        v0 = _random_state(rng, 8, 2, rng.uniform(0.1, 2.0))
        counts.add(tuple(sorted(lattice_strang(v0, 1, 3, 0.05, 20, 6).ops.items())))
    assert len(counts) == 1
    zero = lattice_strang(LatticeState(8, 2, np.zeros((17, 17))), 1, 3, 0.05, 20, 6).ops
    assert tuple(sorted(zero.items())) in counts


def test_op_count_grows_with_K_and_steps():
    v0 = _random_state(np.random.default_rng(0), 8, 1)
    a = lattice_strang(v0, 1, 3, 0.05, 10, 4).ops.total()
    assert lattice_strang(v0, 1, 3, 0.05, 10, 8).ops.total() > a
    assert lattice_strang(v0, 1, 3, 0.05, 20, 4).ops.total() == 2 * a


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("sigma", [3, 5])
def test_conjugation_symmetry(d, sigma):
    # S = (-1)^{k_1 + ... + k_d} maps -Delta to 4d + Delta, so with an onsite
    # shift of -2d the staggered conjugate of a nu-run is the (-nu)-run
    rng = np.random.default_rng(11)
    v0 = _random_state(rng, 4, d, 0.8)
    S = (-1.0) ** np.indices(v0.values.shape).sum(0)
    a = lattice_strang(v0, 1, sigma, 0.05, 40, 10, onsite=-2 * d).snapshots[-1]
    b = lattice_strang(v0.with_values(S * v0.values.conj()), -1, sigma, 0.05, 40, 10,
                       onsite=-2 * d).snapshots[-1]
    assert np.abs(S * a.conj() - b).max() <= 1e-12


def test_restrict():
    v = np.arange(25).reshape(5, 5)
    assert restrict(v, 2, 1).tolist() == [[6, 7, 8], [11, 12, 13], [16, 17, 18]]


def test_truncation_study_monotone_polynomial():
    v0 = from_sampler(lambda k: 1 / (1 + (k ** 2).sum(1)) ** 2, 48, 1, 4.0)
    st_ = truncation_study(v0, [4, 8, 16, 32])
    assert st_.monotone
    assert st_.errors[-1] < st_.errors[0] / 100
    assert st_.decay_exponent >= st_.predicted_exponent


def test_truncation_study_gaussian_reaches_machine_level():
    v0 = from_sampler(lambda k: np.exp(-0.5 * (k ** 2).sum(1)), 48, 1, 4.0)
    st_ = truncation_study(v0, [4, 8, 16, 24])
    assert st_.monotone
    assert st_.errors[-1] <= 1e-14


def test_truncation_study_needs_larger_reference():
    v0 = from_sampler(lambda k: np.exp(-(k ** 2).sum(1)), 8, 1, 1.0)
    with pytest.raises(ValueError):
        truncation_study(v0, [4, 8])


@pytest.mark.parametrize("kw", [dict(nu=0), dict(sigma=4), dict(tau=0.0)])
def test_strang_validation(kw):
    args = dict(nu=1, sigma=3, tau=0.1)
    args.update(kw)
    with pytest.raises(ValueError):
        lattice_strang(LatticeState(1, 1, [0, 1, 0]), args["nu"], args["sigma"], args["tau"], 1, 4)


def test_builtin_plan_runs():
    from schrocert.budget import BudgetConstants
    from schrocert.pipeline import solve
    from schrocert.problems import builtin

    b = builtin("lattice-gaussian")
    res = solve(b.problem, b.state, b.potential, 0.25, BudgetConstants(**b.pinned), lattice=b.lattice)
    tr = res.trajectory
    # drift here comes from the truncated exponential (K is small), not the Cayley half-steps
    assert tr.max_drift <= 1e-8
    assert math.isclose(tr.times[-1], 1.0)
    assert max(tr.phase_ranges) <= 1.0
