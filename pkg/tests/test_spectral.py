import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from stochheat.errors import ConfigurationError, DomainError
from stochheat.spectral import (
    NORM,
    CollocationGrid,
    Eigenbasis,
    SpectralField,
    analyze,
    eigenfunction_eval,
    eval_on_grid,
    grid_to_coeffs,
    project,
    semigroup_apply,
    sup_norm,
    synthesize,
)

coeff_arrays = arrays(
    np.float64, st.integers(1, 24), elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False)
)


def test_eigenfunctions_orthonormal():
    for k in (1, 2, 5):
        for l in (1, 2, 5):
            val = integrate.quad(lambda x: eigenfunction_eval(k, x) * eigenfunction_eval(l, x), 0, np.pi)[0]
            assert val == pytest.approx(1.0 if k == l else 0.0, abs=1e-12)


def test_eigenfunction_boundary_is_zero():
    assert eigenfunction_eval(3, 0.0) == 0.0
    assert eigenfunction_eval(3, np.pi) == 0.0
    assert eigenfunction_eval(1, np.pi / 2) == pytest.approx(NORM)


@pytest.mark.parametrize("k, x", [(0, 1.0), (-1, 1.0), (1, -0.1), (1, 3.2)])
def test_eigenfunction_domain_errors(k, x):
    with pytest.raises(DomainError):
        eigenfunction_eval(k, x)


def test_eigenvalues():
    assert np.array_equal(Eigenbasis(5).eigenvalues, [1, 4, 9, 16, 25])


def test_field_call_and_arithmetic():
    f = SpectralField([1.0, 0.0, 2.0])
    x = np.array([0.3, 1.1])
    expected = NORM * (np.sin(x) + 2 * np.sin(3 * x))
    assert np.allclose(f(x), expected, atol=1e-15)
    g = SpectralField([1.0, 1.0])
    assert np.allclose((f + g).coefficients, [2, 1, 2])
    assert np.allclose((f - g).coefficients, [0, -1, 2])
    assert np.allclose((f * 2).coefficients, [2, 0, 4])
    assert np.allclose((-f).coefficients, [-1, 0, -2])


def test_field_is_immutable():
    f = SpectralField([1.0, 2.0])
    with pytest.raises(ValueError):
        f.coefficients[0] = 3.0


def test_project_truncates_never_extends():
    f = SpectralField([1.0, 2.0, 3.0])
    assert np.array_equal(project(f, 2).coefficients, [1, 2])
    assert np.array_equal(project(SpectralField([5.0]), 10).coefficients, [5.0])
    assert np.array_equal(project(project(f, 2), 2).coefficients, project(f, 2).coefficients)


def test_semigroup_decay():
    f = SpectralField([1.0, 1.0])
    out = semigroup_apply(f, 0.5)
    assert np.allclose(out.coefficients, [np.exp(-0.5), np.exp(-2.0)], rtol=0, atol=1e-16)
    with pytest.raises(DomainError):
        semigroup_apply(f, -1.0)


def test_semigroup_stiff_mode_does_not_overflow():
    f = SpectralField(np.ones(200))
    out = semigroup_apply(f, 10.0)
    assert np.all(np.isfinite(out.coefficients))
    assert out.coefficients[-1] == 0.0


@settings(max_examples=50, deadline=None)
@given(c=coeff_arrays, extra=st.integers(0, 20))
def test_fast_and_direct_transforms_agree(c, extra):
    g = c.size + extra
    fast = synthesize(c, g)
    direct = synthesize(c, g, method="direct")
    assert np.allclose(fast, direct, atol=1e-12 * (1 + np.abs(c).sum()))


@settings(max_examples=50, deadline=None)
@given(c=coeff_arrays, extra=st.integers(0, 20))
def test_analysis_inverts_synthesis(c, extra):
    g = c.size + extra
    back = analyze(synthesize(c, g), c.size)
    assert np.allclose(back, c, atol=1e-12 * (1 + np.abs(c).max()))


def test_analysis_needs_enough_points():
    with pytest.raises(ConfigurationError):
        analyze(np.zeros(4), 5)


def test_grid_points_and_round_trip():
    grid = CollocationGrid(7)
    assert np.allclose(grid.points, np.arange(1, 8) * np.pi / 8)
    f = SpectralField([0.5, -1.0, 0.25])
    vals = eval_on_grid(f, grid)
    assert np.allclose(vals, f(grid.points), atol=1e-14)
    assert np.allclose(grid_to_coeffs(vals, grid, 3).coefficients, f.coefficients, atol=1e-14)


def test_sup_norm_single_mode():
    grid = CollocationGrid(63)  # contains pi/2
    assert sup_norm(SpectralField([2.0]), grid) == pytest.approx(2 * NORM, rel=1e-14)


def test_batched_synthesis_matches_rows(rng):
    c = rng.standard_normal((5, 6))
    batch = synthesize(c, 17)
    for row, cr in zip(batch, c):
        assert np.allclose(row, synthesize(cr, 17))
