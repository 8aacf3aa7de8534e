import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from stochheat.covariance import Kernel, assemble_covariance, factorize
from stochheat.errors import ConfigurationError, DivergenceError
from stochheat.noise import OUPath, couple_restrict, ou_path_exact, sample_brownian
from stochheat.scheme import (
    Nonlinearity,
    SchemeConfig,
    boundedness_report,
    nemytskii_apply,
    simulate,
    step,
    two_mode_initial_condition,
)
from stochheat.spectral import NORM, SpectralField, semigroup_apply


@pytest.fixture(scope="module")
def q2_factor():
    return factorize(assemble_covariance(Kernel.q2(0.1), 128))


def _ou(factor, n, m, seed, T=1.0):
    h = sample_brownian(factor, m, T, seed)
    return ou_path_exact(couple_restrict(h, n, m)) if n < factor.dim else ou_path_exact(h)


def test_pointwise_variants():
    y = np.array([-2.0, 0.0, 0.5, 3.0])
    assert np.allclose(Nonlinearity.rational5()(y), 5 * (1 - y) / (1 + y**2))
    assert np.allclose(Nonlinearity.cubic()(y), -(y**3))
    assert np.allclose(Nonlinearity.linear(2.5)(y), 2.5 * y)
    assert not np.any(Nonlinearity.zero()(y))
    assert Nonlinearity.rational5().growth_p == 0
    assert Nonlinearity.cubic().growth_p == 2
    with pytest.raises(ConfigurationError):
        Nonlinearity.from_name("quartic")


def test_nemytskii_zero_and_linear_are_diagonal():
    u = SpectralField([1.0, -2.0, 0.5])
    assert not np.any(nemytskii_apply(Nonlinearity.zero(), u, 12).coefficients)
    assert np.array_equal(nemytskii_apply(Nonlinearity.linear(3.0), u, 12).coefficients, 3.0 * u.coefficients)


def test_nemytskii_cubic_matches_quadrature():
    a, n = 1.7, 5
    u = SpectralField([a] + [0.0] * (n - 1))
    out = nemytskii_apply(Nonlinearity.cubic(), u, 4 * n).coefficients
    ref = [
        integrate.quad(lambda x: -((a * NORM * np.sin(x)) ** 3) * NORM * np.sin(k * x), 0, np.pi)[0]
        for k in range(1, n + 1)
    ]
    assert np.allclose(out, ref, atol=1e-12)
    # sin^3 = (3 sin x - sin 3x) / 4
    assert out[0] == pytest.approx(-0.75 * a**3 * NORM**2, rel=1e-12)
    assert out[2] == pytest.approx(0.25 * a**3 * NORM**2, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 24))
def test_cubic_dealiasing(seed, n):
    c = np.random.default_rng(seed).standard_normal(n) / np.arange(1, n + 1)
    u = SpectralField(c)
    a = nemytskii_apply(Nonlinearity.cubic(), u, 2 * n).coefficients
    b = nemytskii_apply(Nonlinearity.cubic(), u, 4 * n).coefficients
    assert np.allclose(a, b, atol=1e-10)


def test_nemytskii_grid_too_small():
    with pytest.raises(ConfigurationError):
        nemytskii_apply(Nonlinearity.cubic(), SpectralField(np.ones(8)), 15)


def test_nemytskii_overflow_is_divergence():
    u = SpectralField([1e120])
    with pytest.raises(DivergenceError):
        nemytskii_apply(Nonlinearity.cubic(), u, 8)


def test_step_formula():
    y = SpectralField([0.4, -0.2, 0.1])
    d_o = SpectralField([0.01, 0.02, -0.03])
    F = Nonlinearity.rational5()
    expected = semigroup_apply(y + nemytskii_apply(F, y, 12) * 0.01, 0.01) + d_o
    got = step(y, F, 0.01, d_o, grid_size=12)
    assert np.allclose(got.coefficients, expected.coefficients, atol=1e-15)


def test_pure_decay_single_mode():
    m = 40
    tr = simulate(SchemeConfig(1, m, 1.0), Nonlinearity.zero(), SpectralField([1.0]), OUPath.zero(1, m, 1 / m))
    assert np.allclose(tr.coefficients[:, 0], np.exp(-1 / m) ** np.arange(m + 1), rtol=1e-14)


def test_linear_single_mode_recursion():
    m, c, k = 50, 2.0, 3
    y0 = np.zeros(k)
    y0[-1] = 1.0
    tr = simulate(SchemeConfig(k, m, 1.0), Nonlinearity.linear(c), SpectralField(y0), OUPath.zero(k, m, 1 / m))
    factor = np.exp(-(k**2) / m) * (1 + c / m)
    assert np.allclose(tr.coefficients[:, -1], factor ** np.arange(m + 1), rtol=1e-13)


def test_telescoping_with_noise(q2_factor):
    ou = _ou(q2_factor, 32, 100, 3)
    tr = simulate(SchemeConfig(32, 100), Nonlinearity.zero(), SpectralField.zeros(32), ou)
    assert np.max(np.abs(tr.coefficients - ou.coefficients)) <= 1e-12
    rep = boundedness_report(tr)
    expected = max(np.max(np.abs(s(np.arange(1, 129) * np.pi / 130))) for s in ou.states)
    assert rep.max_sup_norm == pytest.approx(expected, rel=1e-12)


def test_superposition(q2_factor):
    n, m = 16, 64
    o1, o2 = _ou(q2_factor, n, m, 1), _ou(q2_factor, n, m, 2)
    both = OUPath(o1.coefficients + o2.coefficients, o1.dt, o1.eigenvalues)
    xi1, xi2 = two_mode_initial_condition(n), SpectralField(np.linspace(1, 0, n))
    cfg, F = SchemeConfig(n, m), Nonlinearity.zero()
    sum_run = simulate(cfg, F, xi1 + xi2, both).coefficients
    parts = simulate(cfg, F, xi1, o1).coefficients + simulate(cfg, F, xi2, o2).coefficients
    assert np.allclose(sum_run, parts, atol=1e-13)


def test_stiff_linear_part_stays_bounded():
    n, m = 64, 4  # dt * lambda_N = 1024
    y0 = SpectralField(np.ones(n))
    inc = np.cumsum(0.3 * np.random.default_rng(1).standard_normal((m + 1, n)), axis=0)
    inc[0] = 0
    ou = OUPath(inc, 0.25, np.arange(1, n + 1.0) ** 2)
    tr = simulate(SchemeConfig(n, m), Nonlinearity.zero(), y0, ou)
    bound = 1.0 + np.max(np.abs(ou.increments))
    assert np.max(np.abs(tr.coefficients)) <= bound + 1e-12


def test_heat_decay_two_mode():
    n = 6
    xi = two_mode_initial_condition(n)
    tr = simulate(SchemeConfig(n, 32, 1.0), Nonlinearity.zero(), xi, OUPath.zero(n, 32, 1 / 32))
    assert np.allclose(tr.coefficients[-1], xi.coefficients * np.exp(-np.arange(1, n + 1.0) ** 2), atol=1e-14)
    assert xi.coefficients[0] * NORM == pytest.approx(1 / np.sqrt(2))


def test_trajectory_shape_and_history(q2_factor):
    ou = _ou(q2_factor, 8, 64, 0)
    tr = simulate(SchemeConfig(8, 64), Nonlinearity.rational5(), two_mode_initial_condition(8), ou)
    assert len(tr.states) == 65
    assert np.array_equal(tr.states[0].coefficients, two_mode_initial_condition(8).coefficients)
    recomputed = np.max(np.abs(tr.grid_values()), axis=1)
    assert np.allclose(tr.sup_norm_history, recomputed, rtol=1e-14)
    assert tr.times[-1] == pytest.approx(1.0)
    assert tr.bounded_flag


def test_divergence_returns_partial_trajectory():
    n, m = 8, 64
    xi = SpectralField([30.0] + [0.0] * (n - 1))
    tr = simulate(SchemeConfig(n, m), Nonlinearity.cubic(), xi, OUPath.zero(n, m, 1 / m), cap=1.0)
    assert tr.status == "diverged"
    assert tr.steps < m
    assert "step" in tr.message
    with pytest.raises(DivergenceError):
        tr.raise_if_diverged()


def test_custom_nonlinearity_matches_builtin(q2_factor):
    ou = _ou(q2_factor, 8, 64, 5)
    xi = two_mode_initial_condition(8)
    a = simulate(SchemeConfig(8, 64), Nonlinearity.rational5(), xi, ou)
    custom = Nonlinearity.custom(lambda y: 5 * (1 - y) / (1 + y * y), lipschitz_L=6.4)
    b = simulate(SchemeConfig(8, 64), custom, xi, ou)
    assert np.allclose(a.coefficients, b.coefficients, atol=1e-13)


def test_config_validation(q2_factor):
    with pytest.raises(ConfigurationError):
        SchemeConfig(8, 16, dealias_grid=15)
    cfg = SchemeConfig.coupled(8)
    assert cfg.M == 64 and cfg.dt == pytest.approx(1 / 64)
    ou = _ou(q2_factor, 8, 32, 0)
    with pytest.raises(ConfigurationError):
        simulate(cfg, Nonlinearity.zero(), SpectralField.zeros(8), ou)


def test_example2_bounded_at_64_modes(q2_factor):
    n = 64
    for seed in range(5):
        full = sample_brownian(q2_factor, n * n, 1.0, seed)
        ou = ou_path_exact(couple_restrict(full, n, n * n))
        tr = simulate(SchemeConfig.coupled(n), Nonlinearity.cubic(), two_mode_initial_condition(n), ou)
        assert tr.status == "ok"
        assert tr.bounded_flag


def test_example1_max_stable_under_refinement(q2_factor):
    h = sample_brownian(q2_factor, 128 * 128, 1.0, 0)
    ou = ou_path_exact(h)
    F = Nonlinearity.rational5()
    coarse = simulate(SchemeConfig.coupled(64), F, two_mode_initial_condition(64), ou.restrict(64, 64 * 64))
    fine = simulate(SchemeConfig.coupled(128), F, two_mode_initial_condition(128), ou)
    rep = boundedness_report(coarse, fine)
    assert rep.stable
    assert rep.refined_max == pytest.approx(fine.max_sup_norm)


def test_boundedness_report_zero():
    z = simulate(SchemeConfig(4, 8), Nonlinearity.zero(), SpectralField.zeros(4), OUPath.zero(4, 8, 1 / 8))
    rep = boundedness_report(z)
    assert rep.max_sup_norm == 0.0 and rep.bounded
