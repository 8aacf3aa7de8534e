"""Correlated Brownian mode paths and the Ornstein-Uhlenbeck convolution.

Each mode coefficient ``beta^k`` of the Q-Wiener process is a Brownian
motion with ``E[beta^k(t) beta^l(t)] = Sigma[k, l] t``.  A
:class:`BrownianHierarchy` stores increments on the finest grid; coarser
grids and fewer modes are exact restrictions of it, so every resolution in
a convergence study sees the same realization.

The stochastic convolution ``O^k_t = int_0^t exp(-lam_k (t - s)) dbeta^k(s)``
is sampled exactly on the fine grid.  Per fine step the pair
``(dbeta, I)`` with ``I_k = int exp(-lam_k (dt - s)) dbeta^k(s)`` is jointly
Gaussian.  Writing ``I = a * dbeta + U`` with
``a_k = (1 - exp(-lam_k dt)) / (lam_k dt)`` makes ``U`` independent of
``dbeta``, with covariance ``Sigma * G`` (Hadamard product) where
``G[k, l] = dt Cov_u(exp(-lam_k dt u), exp(-lam_l dt u))`` for ``u`` uniform
on [0, 1].  Sampling ``dbeta`` and ``U`` from separate halves of one draw
keeps ``dbeta = sqrt(dt) L z`` exactly and avoids factoring the nearly
singular joint matrix.
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .covariance import CovarianceFactor, CovarianceMatrix, factorize
from .errors import ConfigurationError
from .spectral import synthesize

__all__ = [
    "BrownianHierarchy",
    "OUPath",
    "sample_brownian",
    "couple_restrict",
    "ou_increment_cov",
    "ou_residual_cov",
    "ou_path_exact",
    "ou_path_euler_reference",
    "holder_quotient",
    "normal_block",
]

GENERATOR_VERSION = 1
_BLOCK_STEPS = 512
_SERIES_CUTOFF = 1e-6
_RESIDUAL_SERIES_BELOW = 0.5
_RESIDUAL_TERMS = 24
_HOLDER_ALL_PAIRS = 10_000


def normal_block(seed, block, rows, cols):
    """Standard normals for one block of steps.

    Drawn from a Philox counter-based stream keyed by ``(seed, block)``, so
    any block can be regenerated independently of the others.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    gen = np.random.Generator(np.random.Philox(key=seed | (int(block) << 64)))
    return gen.standard_normal((rows, cols))


def _blocks(steps):
    for b, start in enumerate(range(0, steps, _BLOCK_STEPS)):
        yield b, start, min(start + _BLOCK_STEPS, steps)


@dataclass(frozen=True, eq=False)
class BrownianHierarchy:
    """Correlated Brownian increments on a uniform time grid.

    ``increments[m]`` is ``beta((m + 1) dt) - beta(m dt)`` for the first
    ``modes`` coefficients.  Restricted views keep a reference to the
    ``root`` hierarchy they were derived from and their ``stride`` in root
    steps.
    """

    factor: CovarianceFactor
    steps: int
    T: float
    seed: int
    increments: np.ndarray = field(repr=False)
    root: "BrownianHierarchy" = field(default=None, repr=False)
    stride: int = 1

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape[0] != self.steps:
            raise ConfigurationError("increment rows must equal steps")
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)

    @property
    def modes(self) -> int:
        return self.increments.shape[1]

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def origin(self) -> "BrownianHierarchy":
        return self if self.root is None else self.root

    @property
    def times(self):
        return np.arange(self.steps + 1) * self.dt

    def paths(self):
        """``beta`` at grid times, shape ``(steps + 1, modes)``; row 0 is zero."""
        out = np.zeros((self.steps + 1, self.modes))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def digest(self) -> str:
        """Identity of the underlying realization (shared by all views)."""
        top = self.origin
        cov = top.factor.covariance
        meta = {
            "generator": GENERATOR_VERSION,
            "seed": top.seed,
            "steps": top.steps,
            "modes": top.modes,
            "T": float(top.T),
            "jitter": float(top.factor.jitter_used),
            "sigma": cov.digest() if cov is not None else None,
            "factor": hashlib.sha256(
                top.factor.lower_triangular.astype("<f8").tobytes()
            ).hexdigest(),
        }
        return hashlib.sha256(json.dumps(meta, sort_keys=True).encode()).hexdigest()[:32]


def sample_brownian(factor: CovarianceFactor, steps: int, T: float, seed: int) -> BrownianHierarchy:
    """Sample ``steps`` increments ``sqrt(T/steps) L z_m``."""
    if steps < 1:
        raise ConfigurationError(f"need at least one step, got {steps}")
    if not T > 0:
        raise ConfigurationError(f"final time must be positive, got {T}")
    n = factor.dim
    dt = T / steps
    lt = factor.lower_triangular.T
    inc = np.empty((steps, n))
    for b, lo, hi in _blocks(steps):
        z = normal_block(seed, b, hi - lo, 2 * n)
        inc[lo:hi] = np.sqrt(dt) * (z[:, :n] @ lt)
    return BrownianHierarchy(factor, steps, float(T), int(seed), inc)


def couple_restrict(h: BrownianHierarchy, n: int, m: int) -> BrownianHierarchy:
    """View of ``h`` with ``n`` modes and ``m`` steps; no resampling.

    Coarse increment ``i`` is the sum of the ``h.steps / m`` fine increments
    it spans, accumulated in step order.
    """
    if not 1 <= n <= h.modes:
        raise ConfigurationError(f"cannot restrict {h.modes} modes to {n}")
    if m < 1 or h.steps % m:
        raise ConfigurationError(f"{m} steps do not divide {h.steps}")
    if n == h.modes and m == h.steps:
        return h
    r = h.steps // m
    fine = h.increments[:, :n]
    inc = fine.reshape(m, r, n).sum(axis=1) if r > 1 else fine.copy()
    l = h.factor.lower_triangular[:n, :n]
    cov = h.factor.covariance.truncate(n) if h.factor.covariance is not None else None
    factor = CovarianceFactor(l, h.factor.jitter_used, cov)
    return BrownianHierarchy(factor, m, h.T, h.seed, inc, root=h.origin, stride=h.stride * r)


def _exprel_neg(x):
    """``(1 - exp(-x)) / x`` with the removable singularity at 0."""
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 2.0 + x * x / 6.0, -np.expm1(-safe) / safe)


def ou_increment_cov(dt, eigenvalues, sigma):
    """Covariance ``M`` of one exact OU increment.

    ``M[k, l] = Sigma[k, l] (1 - exp(-(lam_k + lam_l) dt)) / (lam_k + lam_l)``.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    lam = np.asarray(eigenvalues, dtype=float)
    s = sigma.entries if isinstance(sigma, CovarianceMatrix) else np.asarray(sigma, dtype=float)
    x = (lam[:, None] + lam[None, :]) * dt
    return s * (dt * _exprel_neg(x))


def _uniform_exp_covariance(x):
    """``Cov(exp(-x_k u), exp(-x_l u))`` for ``u ~ U[0, 1]``."""
    x = np.asarray(x, dtype=float)
    e = _exprel_neg(x)
    direct = _exprel_neg(x[:, None] + x[None, :]) - np.outer(e, e)
    small = x < _RESIDUAL_SERIES_BELOW
    if np.any(small):
        xs = x[small]
        p = np.arange(1, _RESIDUAL_TERMS + 1)
        # coefficients (-x)^p / p!
        logfact = np.cumsum(np.log(p))
        terms = np.power.outer(-xs, p) * np.exp(-logfact)
        c = 1.0 / (p[:, None] + p[None, :] + 1.0) - 1.0 / np.outer(p + 1.0, p + 1.0)
        idx = np.flatnonzero(small)
        direct[np.ix_(idx, idx)] = terms @ c @ terms.T
    return direct


def ou_residual_cov(dt, eigenvalues, sigma):
    """Covariance of ``U = I - a * dbeta``, the part of the OU increment
    independent of the Brownian increment."""
    lam = np.asarray(eigenvalues, dtype=float)
    s = sigma.entries if isinstance(sigma, CovarianceMatrix) else np.asarray(sigma, dtype=float)
    return s * (dt * _uniform_exp_covariance(lam * dt))


def _equilibrated_factor(c):
    """Lower factor of a PSD matrix with a wide range of diagonal scales."""
    d = np.sqrt(np.clip(np.diag(c), 0.0, None))
    scale = np.where(d > 0, d, 1.0)
    unit = c / np.outer(scale, scale)
    f = factorize(CovarianceMatrix(0.5 * (unit + unit.T)))
    return scale[:, None] * f.lower_triangular


@dataclass(frozen=True, eq=False)
class OUPath:
    """Stochastic convolution coefficients at the grid times ``m dt``."""

    coefficients: np.ndarray = field(repr=False)
    dt: float
    eigenvalues: np.ndarray = field(repr=False)
    mode: str = "exact"
    noise_hash: str = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        c.flags.writeable = False
        lam = np.asarray(self.eigenvalues, dtype=float)[: c.shape[1]]
        if lam.size != c.shape[1]:
            raise ConfigurationError("need one eigenvalue per mode")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def zero(cls, modes, steps, dt):
        """Noise switched off: ``O = 0`` on the given grid."""
        lam = np.arange(1, modes + 1, dtype=float) ** 2
        return cls(np.zeros((steps + 1, modes)), dt, lam, "none", "noise-off")

    @property
    def steps(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def modes(self) -> int:
        return self.coefficients.shape[1]

    @property
    def T(self) -> float:
        return self.steps * self.dt

    @property
    def times(self):
        return np.arange(self.steps + 1) * self.dt

    @property
    def states(self):
        from .spectral import SpectralField

        return [SpectralField(row) for row in self.coefficients]

    @property
    def decay(self):
        return np.exp(-self.eigenvalues * self.dt)

    @property
    def increments(self):
        """``I_m = O_{m+1} - exp(-lam dt) O_m``."""
        o = self.coefficients
        return o[1:] - self.decay * o[:-1]

    def restrict(self, n: int, m: int) -> "OUPath":
        """Same realization at ``m`` coarse steps, first ``n`` modes."""
        if not 1 <= n <= self.modes:
            raise ConfigurationError(f"cannot restrict {self.modes} modes to {n}")
        if m < 1 or self.steps % m:
            raise ConfigurationError(f"{m} steps do not divide {self.steps}")
        r = self.steps // m
        return OUPath(
            self.coefficients[::r, :n], self.dt * r, self.eigenvalues[:n], self.mode, self.noise_hash
        )


def _root_eigenvalues(h, eigenvalues):
    n = h.origin.modes
    if eigenvalues is None:
        return np.arange(1, n + 1, dtype=float) ** 2
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size < n:
        raise ConfigurationError(f"need eigenvalues for all {n} root modes, got {lam.size}")
    return lam[:n]


def ou_path_exact(h: BrownianHierarchy, eigenvalues=None) -> OUPath:
    """Exact OU path sharing the Brownian realization of ``h``.

    The path is always generated on the root grid with all root modes and
    then sampled at the times and modes of ``h``.  ``eigenvalues`` default
    to ``k^2`` and must cover every root mode.
    """
    root = h.origin
    lam = _root_eigenvalues(h, eigenvalues)
    n = root.modes
    dt = root.dt
    cov = root.factor.covariance
    if cov is None:
        l = root.factor.lower_triangular
        cov = CovarianceMatrix(l @ l.T)
    a = _exprel_neg(lam * dt)
    resid = ou_residual_cov(dt, lam, cov)
    # modes with a roundoff-level variance in Sigma carry no noise; their rows
    # would otherwise be blown up to order one by the equilibration
    sd = np.diag(cov.entries)
    null = sd <= 64 * np.finfo(float).eps * max(float(sd.max()), 0.0)
    resid[null, :] = 0.0
    resid[:, null] = 0.0
    rt = _equilibrated_factor(resid).T if np.any(resid) else np.zeros((n, n))
    decay = np.exp(-lam * dt)
    kern = _backend.kernels
    path = np.empty((root.steps + 1, n))
    path[0] = 0.0
    for b, lo, hi in _blocks(root.steps):
        z = normal_block(root.seed, b, hi - lo, 2 * n)
        inc = a * root.increments[lo:hi] + z[:, n:] @ rt
        blk = kern.linear_recursion(decay, np.ascontiguousarray(inc), path[lo].copy())
        path[lo + 1 : hi + 1] = blk[1:]
    full = OUPath(path, dt, lam, "exact", root.digest())
    return full.restrict(h.modes, h.steps)


def ou_path_euler_reference(h: BrownianHierarchy, eigenvalues=None, substeps=1) -> OUPath:
    """OU path from ``O_t = beta(t) - lam int_0^t exp(-lam (t-s)) beta(s) ds``.

    The integral is a trapezoidal sum over ``substeps`` sub-intervals of
    each step of ``h``, using the root Brownian path restricted to that
    resolution.  Intended only as an oracle for :func:`ou_path_exact`.
    """
    if substeps < 1:
        raise ConfigurationError("substeps must be >= 1")
    root = h.origin
    lam = _root_eigenvalues(h, eigenvalues)[: h.modes]
    fine = couple_restrict(root, h.modes, h.steps * substeps)
    beta = fine.paths()
    delta = fine.dt
    d = np.exp(-lam * delta)
    src = 0.5 * delta * (d * beta[:-1] + beta[1:])
    integral = _backend.kernels.linear_recursion(d, np.ascontiguousarray(src), np.zeros(h.modes))
    o = beta - lam * integral
    return OUPath(o[::substeps], h.dt, lam, "euler_reference", root.digest())


def holder_quotient(path: OUPath, theta: float, num_points=None) -> float:
    """Largest ``||O_t2 - O_t1||_V / (t2 - t1)^theta`` over grid pairs.

    All pairs are used up to 10^4 time points; beyond that a geometric set
    of lags is scanned (every start time for each lag).
    """
    if not 0 < theta < 0.5:
        raise ConfigurationError(f"theta must lie in (0, 1/2), got {theta}")
    g = num_points or 4 * path.modes + 1
    vals = synthesize(path.coefficients, g)
    n = vals.shape[0]
    if n < 2:
        return 0.0
    if n <= _HOLDER_ALL_PAIRS:
        lags = np.arange(1, n)
    else:
        lags = np.unique(np.round(np.geomspace(1, n - 1, 400)).astype(int))
        lags = np.union1d(np.arange(1, 65), lags)
    best = 0.0
    for lag in lags:
        diff = np.max(np.abs(vals[lag:] - vals[:-lag]))
        best = max(best, diff / (lag * path.dt) ** theta)
    return float(best)
