import numpy as np
import pytest
from hypothesis import given, strategies as st

from abstab.errors import DomainError
from abstab.ratebound import (
    AffineRateBound,
    TabulatedRateBound,
    forward_admissible,
    max_abs_rate,
    nu_max,
    nu_min,
    symmetric_affine,
    zero_rate,
)

from conftest import example

_, EX_SPEC = example(0.5)  # |kappa'| <= kappa + 1/3


def test_example_envelope():
    assert nu_min(EX_SPEC, 0.5) == pytest.approx(-5 / 6, abs=1e-15)
    assert nu_max(EX_SPEC, 0.5) == pytest.approx(5 / 6, abs=1e-15)
    assert nu_max(EX_SPEC, 1.0) == pytest.approx(4 / 3, abs=1e-15)
    assert EX_SPEC.delta_max(0.0) == pytest.approx(1 / 3, abs=1e-15)
    assert nu_min(EX_SPEC, 1.0) == 0.0
    assert nu_max(EX_SPEC, 0.0) == 0.0


def test_zero_rate():
    z = zero_rate()
    assert nu_min(z, 0.3) == 0.0 and nu_max(z, 0.3) == 0.0
    assert max_abs_rate(z) == 0.0


def test_max_abs_rate():
    assert max_abs_rate(EX_SPEC) == pytest.approx(4 / 3, abs=1e-15)
    assert max_abs_rate(AffineRateBound(-2.0, 0.0, 1.0, -1.0)) == 2.0
    tab = TabulatedRateBound([0, 0.5, 1], [-1, -3, -0.5], [0.2, 0.1, 2.5])
    assert max_abs_rate(tab) == 3.0


def test_domain_errors():
    with pytest.raises(DomainError):
        nu_min(EX_SPEC, 1.2)
    with pytest.raises(DomainError):
        nu_max(EX_SPEC, -0.1)
    with pytest.raises(DomainError):
        AffineRateBound(0.1, 0.0, 1.0, 0.0)  # delta_min > 0
    with pytest.raises(DomainError):
        AffineRateBound(-1.0, 0.0, 0.5, -1.0)  # delta_max(1) < 0
    with pytest.raises(DomainError):
        TabulatedRateBound([0, 0.5, 1], [-1, 0.2, -1], [1, 1, 1])
    with pytest.raises(DomainError):
        TabulatedRateBound([0, 0.7, 0.5, 1], [-1] * 4, [1] * 4)


def test_tabulated_interpolates():
    tab = TabulatedRateBound([0, 0.5, 1], [-1, -3, -0.5], [0.2, 0.1, 2.5])
    assert tab.delta_min(0.25) == pytest.approx(-2.0)
    assert tab.delta_max(0.75) == pytest.approx(1.3)


def test_forward_admissible_boundaries():
    k = np.array([0.0, 0.5, 1.0])
    up = forward_admissible(EX_SPEC, k, np.array([-5.0, 5.0, 5.0]))
    np.testing.assert_allclose(up, [0.0, 5 / 6, 0.0])
    down = forward_admissible(EX_SPEC, k, np.array([-5.0, -5.0, -5.0]))
    np.testing.assert_allclose(down, [0.0, -5 / 6, -4 / 3])


@st.composite
def affine_specs(draw):
    lo0 = -draw(st.floats(0, 5))
    lo1 = -draw(st.floats(0, 5))
    hi0 = draw(st.floats(0, 5))
    hi1 = draw(st.floats(0, 5))
    return AffineRateBound(lo0, lo1 - lo0, hi0, hi1 - hi0)


@given(affine_specs())
def test_clamps_exact(spec):
    assert nu_min(spec, 1.0) == 0.0
    assert nu_max(spec, 0.0) == 0.0


@given(affine_specs(), st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_sandwich(spec, ks):
    k = np.array(ks)
    assert np.all(nu_min(spec, k) <= 0.0)
    assert np.all(nu_max(spec, k) >= 0.0)


@given(affine_specs(), st.floats(0, 3), st.floats(0, 3))
def test_widening_never_decreases_rate(spec, extra_lo, extra_hi):
    wide = AffineRateBound(spec.min_offset - extra_lo, spec.min_slope, spec.max_offset + extra_hi, spec.max_slope)
    assert max_abs_rate(wide) >= max_abs_rate(spec)


@given(st.floats(0, 4), st.floats(0.01, 3))
def test_symmetric_affine(eps, offset):
    s = symmetric_affine(eps, offset)
    assert max_abs_rate(s) == pytest.approx(eps * (1 + offset))
