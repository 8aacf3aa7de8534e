import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochheat.covariance import assemble_covariance, factorize
from stochheat.errors import ConfigurationError, FitError, NoiseMismatchError
from stochheat.harness import (
    ErrorRecord,
    ExperimentConfig,
    fit_rate,
    load_config,
    load_preset,
    pathwise_error,
    preset_names,
    run_convergence_study,
)
from stochheat.noise import ou_path_exact, sample_brownian
from stochheat.scheme import Trajectory
from stochheat.spectral import NORM, synthesize


@pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
def test_fit_recovers_power_law(gamma):
    ns = [16, 32, 64, 128, 256]
    fit = fit_rate([(n, 3.0 * n**-gamma) for n in ns])
    assert fit.slope == pytest.approx(-gamma, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    assert fit.residual < 1e-12
    assert fit.points == 5


def test_fit_constant_errors():
    assert fit_rate([(n, 0.1) for n in (4, 8, 16)]).slope == pytest.approx(0.0, abs=1e-14)


def test_fit_needs_three_usable_points():
    with pytest.raises(FitError):
        fit_rate([(4, 0.1), (8, 0.05)])
    recs = [
        ErrorRecord(4, 16, 0, 0.1, 0.0, "h"),
        ErrorRecord(8, 64, 0, float("nan"), 0.0, "h", "diverged"),
        ErrorRecord(16, 256, 0, 0.0, 0.0, "h"),
    ]
    with pytest.raises(FitError):
        fit_rate(recs)


@settings(max_examples=30, deadline=None)
@given(gamma=st.floats(0.05, 3.0), c=st.floats(1e-3, 1e3))
def test_fit_property(gamma, c):
    fit = fit_rate([(n, c * n**-gamma) for n in (8, 16, 32, 64)])
    assert fit.slope == pytest.approx(-gamma, abs=1e-9)


def _traj(coeffs, dt, noise_hash="h", g=33):
    coeffs = np.asarray(coeffs, dtype=float)
    return Trajectory(coeffs, dt, np.zeros(coeffs.shape[0]), 50.0, g, noise_hash=noise_hash)


def test_pathwise_error_identity_and_shift():
    rng = np.random.default_rng(0)
    c = rng.standard_normal((9, 4))
    ref = _traj(c, 0.125)
    assert pathwise_error(ref, ref) == 0.0
    delta = 0.3
    shifted = c.copy()
    shifted[:, 0] += delta
    err = pathwise_error(_traj(shifted, 0.125), ref, num_points=63)  # grid holds pi/2
    assert err == pytest.approx(delta * NORM, rel=1e-12)


def test_pathwise_error_uses_reference_at_full_modes():
    ref = _traj([[0.0, 0.0, 1.0]] * 5, 0.25)
    coarse = _traj([[0.0]] * 3, 0.5)
    # coarse misses mode 3 entirely: the error is the full mode-3 sup
    assert pathwise_error(coarse, ref, num_points=5) == pytest.approx(NORM, rel=1e-12)


def test_pathwise_error_refuses_mismatched_noise():
    a = _traj(np.zeros((3, 2)), 0.5, "a")
    b = _traj(np.zeros((3, 2)), 0.5, "b")
    with pytest.raises(NoiseMismatchError):
        pathwise_error(a, b)
    with pytest.raises(ConfigurationError):
        pathwise_error(_traj(np.zeros((4, 2)), 1 / 3), _traj(np.zeros((5, 2)), 0.25))


def test_config_defaults_and_invariants():
    cfg = ExperimentConfig()
    assert cfg.n_ref == 256 and cfg.m_ref == 256**2
    assert cfg.eval_grid == 4 * 256 + 1
    assert cfg.steps_for(32) == 1024
    assert ExperimentConfig(dt_rule="paper").dt_rule == "coupled"
    with pytest.raises(ConfigurationError):
        ExperimentConfig(ladder=(16, 512), n_ref=256)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(dt_rule="fixed", fixed_steps=3, m_ref=1024)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(nonlinearity="quartic")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(initial="random")


def test_config_file_and_overrides(tmp_path):
    text = """
[study]
ladder = 4, 8
seeds = 3 4
[noise]
kernel = q1
h = 0.5
[scheme]
nonlinearity = cubic
[reference]
modes = 16
"""
    path = tmp_path / "s.cfg"
    path.write_text(text)
    cfg = load_config(path, {"scheme.cap": "20", "T": "0.5"})
    assert cfg.ladder == (4, 8) and cfg.seeds == (3, 4)
    assert cfg.kernel == "q1" and cfg.h == 0.5
    assert cfg.cap == 20.0 and cfg.T == 0.5
    assert cfg.m_ref == 256
    assert load_config(text).ladder == (4, 8)
    with pytest.raises(ConfigurationError):
        load_config("[bogus]\nx = 1\n")
    with pytest.raises(ConfigurationError):
        load_config(text, {"nope": 1})


def test_presets_load():
    names = preset_names()
    assert {"example1", "example2", "smoke"} <= set(names)
    e1 = load_preset("example1")
    assert (e1.kernel, e1.h, e1.nonlinearity) == ("q2", 0.1, "rational5")
    assert e1.ladder == (16, 32, 64, 128) and e1.n_ref == 256 and e1.m_ref == 65536
    assert load_preset("example2").nonlinearity == "cubic"
    with pytest.raises(ConfigurationError):
        load_preset("missing")


def test_zero_drift_ladder_is_truncation_error():
    cfg = load_preset("smoke", {"nonlinearity": "zero", "initial": "zero", "seeds": "0"})
    study = run_convergence_study(cfg)
    factor = factorize(assemble_covariance(cfg.make_kernel(), cfg.n_ref, cfg.quad_order))
    ou = ou_path_exact(sample_brownian(factor, cfg.m_ref, cfg.T, 0))
    for rec in study.records:
        tail = ou.coefficients[:: cfg.m_ref // rec.M].copy()
        tail[:, : rec.N] = 0.0
        expected = np.max(np.abs(synthesize(tail, cfg.eval_grid)))
        assert rec.sup_error == pytest.approx(expected, rel=1e-10)


def test_deterministic_ladder_decreases():
    cfg = load_preset("smoke", {"noise": "off", "seeds": "0", "ladder": "4 8 16", "modes": "64"})
    study = run_convergence_study(cfg)
    errs = [r.sup_error for r in study.records]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert study.records[0].reference_hash == "noise-off"


def test_study_structure_and_thread_invariance():
    cfg = load_preset("smoke")
    a = run_convergence_study(cfg, threads=1)
    b = run_convergence_study(cfg, threads=2)
    assert [(r.seed, r.N) for r in a.records] == [(s, n) for s in cfg.seeds for n in cfg.ladder]
    assert [r.sup_error for r in a.records] == [r.sup_error for r in b.records]
    for s in a.seeds:
        assert len({r.reference_hash for r in s.records}) == 1
        assert s.records[0].reference_hash == s.noise_hash
    payload = a.rates_payload()
    assert {"slope", "intercept", "residual", "per_seed"} <= set(payload)
    assert len(payload["per_seed"]) == len(cfg.seeds)
    assert a.pooled.points == len(a.records)


def test_divergent_runs_are_flagged_and_excluded():
    cfg = load_preset("smoke", {"nonlinearity": "cubic", "cap": "0.01", "seeds": "0"})
    study = run_convergence_study(cfg)
    assert study.diverged
    assert all(r.status == "diverged" for r in study.records)
    assert study.pooled is None and study.pooled_error


@pytest.mark.slow
def test_mean_error_nonincreasing_along_ladder():
    study = run_convergence_study(load_preset("example1"), threads=4)
    means = list(study.mean_errors().values())
    inversions = [(a, b) for a, b in zip(means, means[1:]) if b > a]
    assert len(inversions) <= 1
    assert all(b <= 1.10 * a for a, b in inversions)


@pytest.mark.slow
@pytest.mark.parametrize("preset", ["example1_q1", "example2_q1"])
def test_scaled_triangle_kernel_rate_band(preset):
    """Supplementary: with the scaled triangular kernel the fitted rate sits at 1/2."""
    study = run_convergence_study(load_preset(preset), threads=4)
    assert not study.diverged
    assert study.slopes_in_band(-0.65, -0.35) >= 4
    assert -0.65 <= study.pooled.slope <= -0.35
