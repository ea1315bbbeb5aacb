import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from schrocert.core import (ConfigError, ControlFunction, Family, GridFunction, InitialState, PotentialModel,
                            ProblemSpec, SingularPart, constant_control, grid_l2_norm, inner, quantize,
                            tail_bound, weighted_tail_norm, zeros)
from schrocert.problems import gaussian_state, gaussian_weighted_norm
from schrocert.qmc import HaltonConfig, cubic_discretize

from oracles import gaussian_tail_l2


def const_grid(R, m, d, c=1.0):
    n = int(2 * R * m)
    return GridFunction(R, m, d, np.full((n,) * d, c, dtype=complex))


# -- grid_l2_norm ------------------------------------------------------------------

@pytest.mark.parametrize("m", [1, 3, 16])
def test_l2_norm_of_constant_one(m):
    assert grid_l2_norm(const_grid(1, m, 1)) == pytest.approx(math.sqrt(2), rel=1e-14)


def test_l2_norm_of_constant_one_2d():
    assert grid_l2_norm(const_grid(1, 4, 2)) == pytest.approx(2.0, rel=1e-14)


def test_l2_norm_zero():
    assert grid_l2_norm(zeros(2, 8, 1)) == 0.0


def test_l2_norm_single_cell_indicator():
    v = np.zeros(4)
    v[1] = 1
    assert grid_l2_norm(GridFunction(1, 2, 1, v)) == pytest.approx(math.sqrt(0.5), rel=1e-14)


grid_values = arrays(np.complex128, 16, elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False,
                                                                     allow_infinity=False))


# scalars away from the subnormal range, where squaring underflows
scalars = st.floats(-50, 50).filter(lambda x: x == 0 or abs(x) > 1e-100)


@given(grid_values, grid_values, scalars, scalars)
def test_l2_norm_homogeneous_and_subadditive(a, b, cr, ci):
    f, g = GridFunction(2, 4, 1, a), GridFunction(2, 4, 1, b)
    c = complex(cr, ci)
    assert grid_l2_norm(f.with_values(c * a)) == pytest.approx(abs(c) * grid_l2_norm(f), rel=1e-12, abs=1e-300)
    assert grid_l2_norm(f.with_values(a + b)) <= (grid_l2_norm(f) + grid_l2_norm(g)) * (1 + 1e-12) + 1e-12


def test_inner_matches_norm():
    rng = np.random.default_rng(0)
    f = GridFunction(1, 4, 2, rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
    assert inner(f, f).real == pytest.approx(grid_l2_norm(f) ** 2, rel=1e-13)


def test_grid_function_shape_validation():
    with pytest.raises(ValueError):
        GridFunction(1, 2, 1, np.zeros(3))
    with pytest.raises(ValueError):
        GridFunction(0.3, 1, 1, np.zeros(1))


def test_grid_function_is_read_only():
    f = zeros(1, 2, 1)
    with pytest.raises(ValueError):
        f.values[0] = 1


def test_midpoints_convention():
    f = zeros(1, 2, 1)
    np.testing.assert_allclose(f.midpoints(), [-0.75, -0.25, 0.25, 0.75])
    pts = zeros(1, 1, 2).mesh()
    np.testing.assert_allclose(pts, [[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]])


# -- weighted_tail_norm ----------------------------------------------------------------

def test_tail_of_compact_support_is_zero():
    f = zeros(4, 4, 1)
    v = np.array(f.values)
    v[12:20] = 3.0  # support [-1, 1)
    assert weighted_tail_norm(f.with_values(v), 1.0, 2.0) == 0.0


def test_tail_of_constant():
    assert weighted_tail_norm(const_grid(2, 4, 1), 1.0, 1.0) == pytest.approx(math.sqrt(2), rel=1e-14)


def test_tail_partial_cells_are_weighted():
    # R0 = 0.75 cuts the cells [-1,-0.5) and [0.5,1) in half
    assert weighted_tail_norm(const_grid(1, 2, 1), 1.0, 0.75) == pytest.approx(math.sqrt(0.5), rel=1e-14)


def test_tail_of_discretised_gaussian():
    g = cubic_discretize(lambda p: np.exp(-p[:, 0] ** 2 / 2), (8, 64), HaltonConfig((2,), 64))
    val = weighted_tail_norm(g, 1.0, 4.0)
    assert val <= 4e-4
    # the continuum tail (high precision oracle) agrees to within the cell averaging error
    assert val == pytest.approx(gaussian_tail_l2(4.0), rel=2e-2)


@given(arrays(np.complex128, 32, elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                             allow_infinity=False)),
       st.floats(0.01, 1.99), st.floats(0, 4))
def test_tail_below_full_norm(v, R0, eta):
    f = GridFunction(2, 8, 1, v)
    assert weighted_tail_norm(f, eta, R0) <= grid_l2_norm(f) * (1 + 1e-12) + 1e-300


@pytest.mark.parametrize("eta", [1.0, 2.0])
@pytest.mark.parametrize("R0", [2.0, 4.0, 8.0])
def test_tail_law_for_gaussian_states(eta, R0):
    st_ = gaussian_state(1, eta)
    g = cubic_discretize(st_.sampler, (16, 16), HaltonConfig((2,), 256))
    C = st_.h_eta[1]
    assert weighted_tail_norm(g, eta, R0) <= tail_bound(C, eta, R0) <= C * R0 ** -eta


def test_tail_arguments_checked():
    with pytest.raises(ValueError):
        weighted_tail_norm(const_grid(1, 2, 1), 1.0, 1.0)
    with pytest.raises(ValueError):
        weighted_tail_norm(const_grid(1, 2, 1), -1.0, 0.5)


# -- certificates and specs -----------------------------------------------------------

def test_quantize():
    assert quantize(np.array([0.3]), 2)[0] == 0.25
    v = np.array([0.1 + 0.3j])
    assert quantize(v, 52) is v


def test_problem_spec_validation():
    ProblemSpec(Family.LINEAR)
    with pytest.raises(ConfigError):
        ProblemSpec(Family.DEFOCUSING_NLS, sigma=4)
    with pytest.raises(ConfigError):
        ProblemSpec(Family.DEFOCUSING_NLS, sigma=3, nu=-1)
    with pytest.raises(ConfigError):
        ProblemSpec(Family.LINEAR, horizon=0)
    ProblemSpec(Family.LATTICE_NLS, 2, sigma=5, nu=-1)


def test_initial_state_clbbv_must_be_monotone():
    with pytest.raises(ConfigError):
        InitialState(lambda p: 0 * p[:, 0], ("H2+eps_2", 1.0), 1.0, lambda R: 1.0 / R)
    with pytest.raises(ConfigError):
        InitialState(lambda p: 0 * p[:, 0], ("H7", 1.0), 1.0, lambda R: 1.0)


def test_gaussian_certificate_values():
    st_ = gaussian_state(1, 2.0)
    # ||<x>^2 g||^2 = 1 + 2 <x^2> + <x^4> = 1 + 1 + 3/4 for the normalised Gaussian
    assert st_.h_eta[1] == pytest.approx(math.sqrt(2.75), rel=1e-8)
    assert gaussian_weighted_norm(0.0) == pytest.approx(1.0, rel=1e-8)


def test_control_w11_budget_checked():
    u = ControlFunction(lambda t: 2 * t, (0.0, 1.0), 3.1, 2.0)
    u.check()
    assert sum(u.piece_norms()) == pytest.approx(3.0, rel=1e-6)
    with pytest.raises(ConfigError):
        PotentialModel(u=ControlFunction(lambda t: 2 * t, (0.0, 1.0), 2.0, 2.0))
    assert constant_control(50.0, 1.0).w11_budget == 50.0


def test_singularities_gap_checked():
    sp_ = SingularPart(lambda p: 0 * p[:, 0], np.array([[0.0], [0.5]]), 2.0, lambda e, R: (0.1, 1.0), gap=1.0)
    with pytest.raises(ConfigError):
        PotentialModel(w_sing=sp_)
