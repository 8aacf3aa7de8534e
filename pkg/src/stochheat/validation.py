"""Statistical oracles for the noise samplers and a quick invariant suite."""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .covariance import CovarianceMatrix, Kernel, assemble_covariance, factorize
from .noise import (
    OUPath,
    couple_restrict,
    holder_quotient,
    ou_increment_cov,
    ou_path_exact,
    sample_brownian,
)
from .scheme import Nonlinearity, SchemeConfig, nemytskii_apply, two_mode_initial_condition, simulate
from .spectral import NORM, SpectralField


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.6g} (threshold {self.threshold:.6g}) {self.detail}".rstrip()

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
            "runtime_s": self.runtime,
        }


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.runtime = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _isserlis_se(sigma, n):
    """Standard error of the zero-mean second-moment estimate of each entry."""
    d = np.diag(sigma)
    return np.sqrt((np.outer(d, d) + sigma**2) / n)


def _zscore_check(name, emp, sigma, samples, limit):
    se = _isserlis_se(sigma, samples)
    dev = np.abs(emp - sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, np.where(dev > 0, np.inf, 0.0))
    worst = float(np.max(z))
    k, l = np.unravel_index(int(np.argmax(z)), z.shape)
    return CheckResult(
        name, worst <= limit, worst, limit, f"worst entry ({k + 1},{l + 1})", extra={"empirical": emp}
    )


@_timed
def brownian_covariance_check(kernel=None, modes=8, samples=10_000, T=1.0, first_seed=0, quad_order=512,
                              limit=5.0):
    """Empirical ``Cov(beta(T))`` over independent seeds against ``Sigma T``."""
    kernel = kernel or Kernel.q2(0.1)
    cov = assemble_covariance(kernel, modes, quad_order)
    factor = factorize(cov)
    ends = np.empty((samples, modes))
    for i in range(samples):
        h = sample_brownian(factor, 1, T, first_seed + i)
        ends[i] = h.increments[0]
    emp = ends.T @ ends / samples
    return _zscore_check("brownian-covariance", emp, cov.entries * T, samples, limit)


@_timed
def ou_exact_check(kernel=None, modes=4, dt=0.01, samples=10_000, first_seed=0, quad_order=512, limit=5.0):
    """Increments from the production exact sampler against ``M``."""
    kernel = kernel or Kernel.q2(0.1)
    cov = assemble_covariance(kernel, modes, quad_order)
    factor = factorize(cov)
    lam = np.arange(1, modes + 1, dtype=float) ** 2
    m = ou_increment_cov(dt, lam, cov)
    inc = np.empty((samples, modes))
    for i in range(samples):
        inc[i] = ou_path_exact(sample_brownian(factor, 1, dt, first_seed + i)).coefficients[1]
    emp = inc.T @ inc / samples
    return _zscore_check("ou-exact-sampler", emp, m, samples, limit)


@_timed
def ou_oracle_check(kernel=None, modes=4, dt=0.01, substeps=10_000, samples=10_000, seed=20240611,
                    quad_order=512, tolerance=0.02, chunk=10_000):
    """Brute-force Euler-Maruyama for ``dI = -lam I dt + dbeta`` over one step.

    The (mean-centred) sample covariance of ``I(dt)`` must match the closed-form ``M`` within
    ``tolerance * max|M|``.  Uses an independent PCG64 stream.
    """
    kernel = kernel or Kernel.q2(0.1)
    cov = assemble_covariance(kernel, modes, quad_order)
    lt = factorize(cov).lower_triangular.T
    lam = np.arange(1, modes + 1, dtype=float) ** 2
    m = ou_increment_cov(dt, lam, cov)
    h = dt / substeps
    damp = 1.0 - lam * h
    rng = np.random.Generator(np.random.PCG64(seed))
    acc = np.zeros((modes, modes))
    total = np.zeros(modes)
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        x = np.zeros((k, modes))
        for _ in range(substeps):
            x *= damp
            x += math.sqrt(h) * (rng.standard_normal((k, modes)) @ lt)
        acc += x.T @ x
        total += x.sum(axis=0)
        done += k
    mean = total / samples
    emp = (acc - samples * np.outer(mean, mean)) / (samples - 1)
    scale = float(np.max(np.abs(m)))
    worst = float(np.max(np.abs(emp - m))) / scale
    return CheckResult(
        "ou-euler-oracle", worst <= tolerance, worst, tolerance, "max |emp - M| / max |M|",
        extra={"empirical": emp, "M": m},
    )


def noise_check(kernel=None, brownian_modes=8, ou_modes=4, dt=0.01, samples=10_000, substeps=10_000,
                seed=0, oracle_seed=20240611, quad_order=512):
    return [
        brownian_covariance_check(kernel, brownian_modes, samples, first_seed=seed, quad_order=quad_order),
        ou_exact_check(kernel, ou_modes, dt, samples, first_seed=seed, quad_order=quad_order),
        ou_oracle_check(kernel, ou_modes, dt, substeps, samples, seed=oracle_seed, quad_order=quad_order),
    ]


# selftest ---------------------------------------------------------------


def _check(name, value, threshold, detail=""):
    return CheckResult(name, bool(value <= threshold), float(value), float(threshold), detail)


def _telescoping(seed):
    n, steps = 32, 100
    factor = factorize(assemble_covariance(Kernel.q2(0.1), n, 128))
    ou = ou_path_exact(sample_brownian(factor, steps, 1.0, seed))
    tr = simulate(SchemeConfig(n, steps), Nonlinearity.zero(), SpectralField(np.zeros(n)), ou)
    return float(np.max(np.abs(tr.coefficients - ou.coefficients)))


def _heat_decay():
    n = 8
    xi = two_mode_initial_condition(n)
    tr = simulate(SchemeConfig(n, 64), Nonlinearity.zero(), xi, OUPath.zero(n, 64, 1 / 64))
    exact = xi.coefficients * np.exp(-np.arange(1, n + 1) ** 2 * 1.0)
    return float(np.max(np.abs(tr.coefficients[-1] - exact)))


def _constant_kernel():
    n = 16
    k = np.arange(1, n + 1)
    c = NORM * (1 - (-1.0) ** k) / k
    s = assemble_covariance(Kernel("constant"), n).entries
    return float(np.max(np.abs(s - np.outer(c, c))))


def _restriction(seed):
    factor = factorize(CovarianceMatrix(np.eye(6)))
    h = sample_brownian(factor, 64, 1.0, seed)
    r = couple_restrict(h, 4, 16)
    return float(np.max(np.abs(r.increments - h.increments[:, :4].reshape(16, 4, 4).sum(axis=1))))


def _dealias():
    rng = np.random.default_rng(7)
    u = SpectralField(rng.standard_normal(12) / np.arange(1, 13))
    a = nemytskii_apply(Nonlinearity.cubic(), u, 24).coefficients
    b = nemytskii_apply(Nonlinearity.cubic(), u, 48).coefficients
    return float(np.max(np.abs(a - b)))


def _holder_linear():
    steps, n = 200, 3
    c = np.zeros((steps + 1, n))
    c[:, 0] = np.linspace(0.0, 1.0, steps + 1)
    q = holder_quotient(OUPath(c, 1.0 / steps, np.arange(1, n + 1.0) ** 2), 0.25)
    return abs(q - NORM)


def _backend_parity():
    if "compiled" not in _backend.AVAILABLE:
        return 0.0
    py, cc = _backend.get("python"), _backend.get("compiled")
    rng = np.random.default_rng(3)
    n, steps = 16, 50
    ou = np.ascontiguousarray(np.cumsum(0.05 * rng.standard_normal((steps + 1, n)), axis=0))
    y0 = rng.standard_normal(n) / np.arange(1, n + 1)
    decay = np.exp(-np.arange(1, n + 1) ** 2 * 0.01)
    args = (y0, decay, 0.01, ou, 63, py.VARIANT_RATIONAL5, 0.0, 1e6)
    a = py.exp_euler(*args)[0]
    b = cc.exp_euler(*args)[0]
    return float(np.max(np.abs(a - b)))


def selftest():
    """Fast invariant suite; each entry is a :class:`CheckResult`."""
    checks = [
        ("telescoping", lambda: max(_telescoping(s) for s in range(3)), 1e-12, "F = 0 reproduces P_N O"),
        ("heat-decay", _heat_decay, 1e-12, "xi_k exp(-k^2 T)"),
        ("constant-kernel", _constant_kernel, 1e-8, "rank-one closed form"),
        ("restriction", lambda: _restriction(5), 1e-14, "summed fine increments"),
        ("dealiasing", _dealias, 1e-10, "cubic on 2N vs 4N grid"),
        ("holder-linear-path", _holder_linear, 1e-12, "T^0.75 sqrt(2/pi)"),
        ("backend-parity", _backend_parity, 1e-11, f"backend {_backend.NAME}"),
    ]
    out = []
    for name, fn, tol, detail in checks:
        t0 = time.perf_counter()
        try:
            res = _check(name, fn(), tol, detail)
        except Exception as exc:  # report, do not abort the suite
            res = CheckResult(name, False, math.nan, tol, f"raised {type(exc).__name__}: {exc}")
        res.runtime = time.perf_counter() - t0
        out.append(res)
    return out
