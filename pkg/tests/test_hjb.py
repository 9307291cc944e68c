import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from abstab.errors import CflUnsatisfiable, DomainError
from abstab.hjb import interp_row, kappa_nodes, make_grid, max_abs_f, solve, sweep_step
from abstab.plant import PlantSystem, PolarField
from abstab.ratebound import AffineRateBound, nu_max, nu_min, symmetric_affine, zero_rate

from conftest import ROTATION, example

EX_PLANT, EX_SPEC = example(0.5)

# spectral norms and the CFL step for the example grid, frozen from a 30-digit closed-form evaluation
NORM_A = 1.28077640640441513745535246399
NORM_B = 0.838525491562421136153440125774
DTHETA_STAR = 0.00353890118590237923273675374004
DTHETA = 0.0035378295648533707640345083145


def test_make_grid_example():
    assert EX_PLANT.norm_bound() == pytest.approx(NORM_A + NORM_B, rel=1e-14)
    grid = make_grid(EX_PLANT, EX_SPEC, 0.01)
    assert grid.J == 100
    assert grid.steps_per_pi == 888 == math.ceil(math.pi / DTHETA_STAR)
    assert grid.dtheta == pytest.approx(DTHETA, rel=1e-14)
    assert grid.steps_per_pi * grid.dtheta == pytest.approx(math.pi, rel=1e-15)
    assert grid.cfl_number < 1.0


def test_make_grid_zero_rate_and_override():
    assert make_grid(EX_PLANT, zero_rate(), 0.01).steps_per_pi == 8
    g = make_grid(EX_PLANT, zero_rate(), 0.25, dtheta=0.1)
    assert g.steps_per_pi == 32 and g.J == 4
    with pytest.raises(CflUnsatisfiable):
        make_grid(EX_PLANT, EX_SPEC, 0.01, dtheta=0.01)
    with pytest.raises(CflUnsatisfiable):
        make_grid(EX_PLANT, EX_SPEC, 1e-4, max_steps_per_pi=1000)
    with pytest.raises(DomainError):
        make_grid(EX_PLANT, EX_SPEC, 0.03)


@given(st.floats(0.05, 3.0), st.sampled_from([0.5, 0.1, 0.05, 0.01]))
def test_cfl_strict(rate, dk):
    spec = symmetric_affine(rate, 0.0)
    grid = make_grid(EX_PLANT, spec, dk)
    assert grid.dtheta * EX_PLANT.norm_bound() * rate < dk
    # the next coarser divisor of pi would not satisfy the bound
    if grid.steps_per_pi > 1:
        assert math.pi / (grid.steps_per_pi - 1) * EX_PLANT.norm_bound() * rate >= dk


def test_interp_row_examples():
    grid = make_grid(EX_PLANT, zero_rate(), 0.25)
    row = kappa_nodes(4) ** 2
    assert interp_row(row, 0.125, grid) == pytest.approx(0.03125, abs=1e-16)
    assert interp_row(row, 0.9, grid) == pytest.approx(0.5625 + 0.6 * 0.4375, abs=1e-15)
    np.testing.assert_array_equal(interp_row(row, kappa_nodes(4), grid), row)
    assert interp_row(row, 1.0 + 1e-13, grid) == 1.0
    with pytest.raises(DomainError):
        interp_row(row, 1.001, grid)
    with pytest.raises(DomainError):
        interp_row(row, -0.001, grid)


def test_first_step_example():
    grid = make_grid(EX_PLANT, EX_SPEC, 0.01)
    row1 = sweep_step(PolarField(EX_PLANT), EX_SPEC, grid, np.ones(101), 0)
    # at angle 0, g = 1 and f = -0.5 + 0.375 kappa
    expected = 1.0 + (-0.5 + 0.375 * kappa_nodes(100)) * grid.dtheta
    np.testing.assert_allclose(row1, expected, rtol=0, atol=1e-15)


def _scalar_step(plant, spec, grid, row, n):
    """Reference update written node by node with plain floats."""
    theta = (n % grid.steps_per_pi) * grid.dtheta
    c, s = math.cos(theta), math.sin(theta)
    out = []
    J = grid.J
    for j in range(J + 1):
        k = j / J
        M = plant.A + k * plant.B
        h = c * (M[0, 0] * c + M[0, 1] * s) + s * (M[1, 0] * c + M[1, 1] * s)
        g = -s * (M[0, 0] * c + M[0, 1] * s) + c * (M[1, 0] * c + M[1, 1] * s)
        f = h / g
        best = -math.inf
        for nu in (float(nu_max(spec, k)), float(nu_min(spec, k))):
            foot = min(1.0, max(0.0, k - g * nu * grid.dtheta))
            i = min(int(math.floor(foot * J)), J - 1)
            w = foot * J - i
            best = max(best, row[i] + w * (row[i + 1] - row[i]))
        out.append(best + f * row[j] * grid.dtheta)
    return np.array(out)


@given(st.integers(0, 2**31), st.integers(0, 5000))
def test_step_matches_scalar_reference(seed, n):
    rng = np.random.default_rng(seed)
    grid = make_grid(EX_PLANT, EX_SPEC, 0.05)
    row = rng.uniform(0.2, 3.0, grid.J + 1)
    fast = sweep_step(PolarField(EX_PLANT), EX_SPEC, grid, row, n)
    np.testing.assert_allclose(fast, _scalar_step(EX_PLANT, EX_SPEC, grid, row, n), rtol=1e-12, atol=1e-12)


def test_pure_rotation_is_one():
    rot = PlantSystem(ROTATION, [0.3, 0.1], [0, 0])
    field = solve(rot, symmetric_affine(1.0, 0.5), 0.05, 4)
    np.testing.assert_allclose(field.rows, 1.0, rtol=0, atol=1e-12)


def test_zero_rate_matches_quadrature():
    grid = make_grid(EX_PLANT, zero_rate(), 0.1, dtheta=math.pi / 2000)
    field = solve(EX_PLANT, zero_rate(), grid=grid, n_max=2)
    pf = PolarField(EX_PLANT)
    mf = max_abs_f(pf, grid)
    for k in (0.0, 0.3, 1.0):
        for N in (1, 2):
            exact = math.exp(quad(lambda t: float(pf.f(k, t)), 0, N * math.pi, limit=200)[0])
            got = field.value(k, N * grid.steps_per_pi)
            assert abs(got / exact - 1) <= 5 * grid.dtheta * mf * N * math.pi


def test_basic_invariants(example_fields):
    for field in example_fields.values():
        assert np.all(field.rows[0] == 1.0)
        assert np.all(field.rows > 0)
        assert np.all(np.isfinite(field.rows))
        assert field.rows.shape == (field.n_rows, field.grid.J + 1)
        assert field.branch.shape == (field.n_rows - 1, field.grid.J + 1)


def test_streaming_equals_full(example_fields):
    plant, spec = example(0.5)
    streamed = solve(plant, spec, 0.01, 20, keep="pi")
    np.testing.assert_array_equal(streamed.rows_at_pi(), example_fields[0.5].rows_at_pi())
    with pytest.raises(KeyError):
        streamed.row(1)


def test_wider_envelope_never_much_lower():
    plant, _ = example(0.4)
    narrow = symmetric_affine(0.5, 1 / 3)
    wide = symmetric_affine(1.0, 1 / 3)
    grid = make_grid(plant, wide, 0.02)
    a = solve(plant, narrow, grid=grid, n_max=4, keep="pi").rows_at_pi()
    b = solve(plant, wide, grid=grid, n_max=4, keep="pi").rows_at_pi()
    z = solve(plant, zero_rate(), grid=grid, n_max=4, keep="pi").rows_at_pi()
    # the scheme is monotone only up to interpolation error at local maxima
    assert np.all(b >= a - 2 * grid.dkappa)
    assert np.all(a >= z - 2 * grid.dkappa)
    assert b[-1].max() > a[-1].max() > z[-1].max()


def test_positivity_guard():
    plant = PlantSystem([[-0.5, -1.0], [1.0, 0.0]], [0, 0], [0, 0])
    grid = make_grid(plant, zero_rate(), 0.1, dtheta=math.pi)
    assert grid.dtheta * max_abs_f(PolarField(plant), grid) >= 1
    with pytest.raises(CflUnsatisfiable):
        solve(plant, zero_rate(), grid=grid, n_max=1)


def test_solve_argument_errors():
    with pytest.raises(DomainError):
        solve(EX_PLANT, EX_SPEC, 0.1, 0)
    with pytest.raises(DomainError):
        solve(EX_PLANT, EX_SPEC, 0.1, 1, keep="some")
