"""Exponential-Euler time stepping on the Galerkin space.

One step maps ``Y`` to ``S_dt (Y + dt P_N F(Y)) + dO`` where ``dO`` is
``P_N (O_{(m+1)dt} - S_dt O_{m dt})`` taken from a sampled OU path.  With
``F = 0`` the recursion telescopes to ``Y_m = S_{m dt} Y_0 + P_N O_{m dt}``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, _fallback
from .errors import ConfigurationError, DivergenceError
from .noise import OUPath
from .spectral import (
    SpectralField,
    analyze,
    semigroup_apply,
    synthesize,
)

__all__ = [
    "Nonlinearity",
    "SchemeConfig",
    "Trajectory",
    "BoundednessReport",
    "nemytskii_apply",
    "step",
    "simulate",
    "boundedness_report",
    "two_mode_initial_condition",
]

_CODES = {
    "zero": _fallback.VARIANT_ZERO,
    "linear": _fallback.VARIANT_LINEAR,
    "rational5": _fallback.VARIANT_RATIONAL5,
    "cubic": _fallback.VARIANT_CUBIC,
}
_POLYNOMIAL = ("zero", "linear", "cubic")
_RATIONAL5_L = 5.0 * (1.0 + 2.0 * (2.0 - math.sqrt(3.0)) - (2.0 - math.sqrt(3.0)) ** 2) / (
    1.0 + (2.0 - math.sqrt(3.0)) ** 2
) ** 2


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Scalar drift ``f`` lifted pointwise to fields.

    ``lipschitz_L`` and ``growth_p`` document the bound
    ``|f(u) - f(v)| <= L |u - v| (1 + |u|^p + |v|^p)``; they are metadata
    and never used by the solver.
    """

    variant: str
    c: float = 0.0
    func: object = field(default=None, repr=False)
    lipschitz_L: float = 0.0
    growth_p: int = 0

    def __post_init__(self):
        if self.variant not in _CODES and self.variant != "custom":
            raise ConfigurationError(f"unknown nonlinearity {self.variant!r}")
        if self.variant == "custom" and not callable(self.func):
            raise ConfigurationError("custom nonlinearity needs a callable")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def linear(cls, c):
        return cls("linear", c=float(c), lipschitz_L=abs(float(c)))

    @classmethod
    def rational5(cls):
        """``f(y) = 5 (1 - y) / (1 + y^2)``, globally Lipschitz."""
        return cls("rational5", lipschitz_L=_RATIONAL5_L, growth_p=0)

    @classmethod
    def cubic(cls):
        """``f(y) = -y^3``, locally Lipschitz with polynomial growth 2."""
        return cls("cubic", lipschitz_L=3.0, growth_p=2)

    @classmethod
    def custom(cls, func, lipschitz_L=0.0, growth_p=0):
        return cls("custom", func=func, lipschitz_L=lipschitz_L, growth_p=growth_p)

    @classmethod
    def from_name(cls, name, c=1.0):
        if name == "linear":
            return cls.linear(c)
        ctor = {"zero": cls.zero, "rational5": cls.rational5, "cubic": cls.cubic}.get(name)
        if ctor is None:
            raise ConfigurationError(f"unknown nonlinearity {name!r}")
        return ctor()

    @property
    def code(self):
        return _CODES.get(self.variant)

    @property
    def is_diagonal(self):
        return self.variant in ("zero", "linear")

    def default_dealias_grid(self, n):
        """``4n - 1`` points: ``4n`` intervals, a power of two when ``n`` is."""
        return max(4 * n - 1, 2 * n)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(y), dtype=float)
        return _fallback.pointwise(self.code, self.c)(y)

    def describe(self):
        return f"linear({self.c!r})" if self.variant == "linear" else self.variant


@dataclass(frozen=True)
class SchemeConfig:
    """Galerkin size ``N``, ``M`` steps on ``[0, T]`` and collocation sizes.

    ``dealias_grid`` defaults per nonlinearity (``4N - 1``) and must be at
    least ``2N``; ``eval_grid`` defaults to ``4N + 1``.
    """

    N: int
    M: int
    T: float = 1.0
    dealias_grid: int = None
    eval_grid: int = None

    def __post_init__(self):
        if self.N < 1 or self.M < 1 or not self.T > 0:
            raise ConfigurationError(f"invalid scheme sizes N={self.N} M={self.M} T={self.T}")
        if self.dealias_grid is not None and self.dealias_grid < 2 * self.N:
            raise ConfigurationError(
                f"dealias grid {self.dealias_grid} < 2N = {2 * self.N}"
            )
        if self.eval_grid is None:
            object.__setattr__(self, "eval_grid", 4 * self.N + 1)

    @classmethod
    def coupled(cls, N, T=1.0, **kw):
        """Coupled step size ``dt = T / N^2``."""
        return cls(N, N * N, T, **kw)

    @property
    def dt(self) -> float:
        return self.T / self.M

    def resolved_dealias_grid(self, F: Nonlinearity):
        return self.dealias_grid or F.default_dealias_grid(self.N)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``Y_m`` for ``m = 0..M`` with sup-norm monitoring.

    On divergence ``status`` is ``"diverged"`` and only the states up to
    ``steps_done`` are stored.
    """

    coefficients: np.ndarray = field(repr=False)
    dt: float
    sup_norm_history: np.ndarray = field(repr=False)
    cap: float
    eval_grid: int
    status: str = "ok"
    message: str = ""
    noise_hash: str = None
    config: SchemeConfig = None
    nonlinearity: str = ""

    @property
    def steps(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def modes(self) -> int:
        return self.coefficients.shape[1]

    @property
    def times(self):
        return np.arange(self.steps + 1) * self.dt

    @property
    def states(self):
        return [SpectralField(row) for row in self.coefficients]

    def state(self, m) -> SpectralField:
        return SpectralField(self.coefficients[m])

    @property
    def max_sup_norm(self) -> float:
        return float(np.max(self.sup_norm_history)) if self.sup_norm_history.size else 0.0

    @property
    def bounded_flag(self) -> bool:
        return self.status == "ok" and self.max_sup_norm <= self.cap

    def raise_if_diverged(self):
        if self.status != "ok":
            raise DivergenceError(self.message, step=self.steps)
        return self

    def grid_values(self, num_points=None, every=1):
        return synthesize(self.coefficients[::every], num_points or self.eval_grid)


def _sup_history(coeffs, g, chunk=4096):
    out = np.empty(coeffs.shape[0])
    for lo in range(0, coeffs.shape[0], chunk):
        vals = synthesize(coeffs[lo : lo + chunk], g)
        out[lo : lo + chunk] = np.max(np.abs(vals), axis=-1)
    return out


def nemytskii_apply(F: Nonlinearity, u: SpectralField, grid_size: int) -> SpectralField:
    """``P_N F(u)`` by collocation on ``grid_size`` interior points."""
    n = u.modes
    if grid_size < 2 * n:
        raise ConfigurationError(f"dealias grid {grid_size} < 2N = {2 * n}")
    if F.variant == "zero":
        return SpectralField(np.zeros(n), u.basis)
    if F.variant == "linear":
        return SpectralField(F.c * u.coefficients, u.basis)
    vals = synthesize(u.coefficients, grid_size)
    with np.errstate(over="ignore", invalid="ignore"):
        fv = F(vals)
    if not np.all(np.isfinite(fv)):
        raise DivergenceError(
            f"non-finite {F.describe()} values (max |u| = {np.max(np.abs(vals)):.3e})",
            value=float(np.max(np.abs(vals))),
        )
    return SpectralField(analyze(fv, n), u.basis)


def step(Y: SpectralField, F: Nonlinearity, dt: float, dO: SpectralField, grid_size=None) -> SpectralField:
    """One exponential-Euler step ``S_dt (Y + dt P_N F(Y)) + dO``."""
    if dO.modes != Y.modes:
        raise ConfigurationError(f"noise increment has {dO.modes} modes, state {Y.modes}")
    g = grid_size or F.default_dealias_grid(Y.modes)
    drift = nemytskii_apply(F, Y, g)
    return semigroup_apply(Y + dt * drift, dt) + dO


def two_mode_initial_condition(n) -> SpectralField:
    """``sin(x)/sqrt(2) + (3 sqrt(2)/5) sin(3x)`` in the normalized basis."""
    c = np.zeros(n)
    scale = np.sqrt(np.pi / 2.0)
    c[0] = scale / np.sqrt(2.0)
    if n >= 3:
        c[2] = scale * 3.0 * np.sqrt(2.0) / 5.0
    return SpectralField(c)


def simulate(
    config: SchemeConfig,
    F: Nonlinearity,
    xi: SpectralField,
    ou: OUPath,
    cap: float = 50.0,
    abort_factor: float = 10.0,
    backend=None,
) -> Trajectory:
    """Run ``config.M`` steps from ``Y_0 = P_N xi`` driven by ``ou``.

    ``ou`` must live on exactly the config's time grid and carry at least
    ``N`` modes (use :meth:`OUPath.restrict`).  The run stops as soon as a
    state is non-finite or exceeds ``abort_factor * cap`` on the dealiasing
    grid; the partial trajectory is returned with ``status="diverged"``.
    """
    n, m = config.N, config.M
    if ou.steps != m:
        raise ConfigurationError(f"OU path has {ou.steps} steps, config needs {m}")
    if not math.isclose(ou.dt, config.dt, rel_tol=1e-12):
        raise ConfigurationError(f"OU path dt {ou.dt} differs from config dt {config.dt}")
    if ou.modes < n:
        raise ConfigurationError(f"OU path has {ou.modes} modes, config needs {n}")
    kern = _backend.get(backend)
    if F.code is None and kern is not _fallback:
        kern = _fallback
    y0 = np.zeros(n)
    k = min(n, xi.modes)
    y0[:k] = xi.coefficients[:k]
    lam = np.arange(1, n + 1, dtype=float) ** 2
    decay = np.exp(-lam * config.dt)
    g = config.resolved_dealias_grid(F)
    states, done, status, bad = kern.exp_euler(
        y0,
        decay,
        config.dt,
        np.ascontiguousarray(ou.coefficients[:, :n]),
        g,
        F.code if F.code is not None else -1,
        F.c,
        abort_factor * cap,
        **({"func": F.func} if F.code is None else {}),
    )
    message = ""
    state = "ok"
    if status != _fallback.STATUS_OK:
        state = "diverged"
        states = states[: done + 1]
        what = "non-finite state" if status == _fallback.STATUS_NONFINITE else "abort level exceeded"
        message = f"{what} at step {done} (t = {done * config.dt:.6g}, |Y| = {bad:.3e})"
    sup = _sup_history(states, config.eval_grid)
    return Trajectory(
        coefficients=states,
        dt=config.dt,
        sup_norm_history=sup,
        cap=float(cap),
        eval_grid=config.eval_grid,
        status=state,
        message=message,
        noise_hash=ou.noise_hash,
        config=config,
        nonlinearity=F.describe(),
    )


@dataclass(frozen=True)
class BoundednessReport:
    max_sup_norm: float
    argmax_step: int
    bounded: bool
    refined_max: float = None
    stable: bool = None


def boundedness_report(traj: Trajectory, refined: Trajectory = None, tolerance=0.10) -> BoundednessReport:
    """Maximum sup norm, where it occurs, and (given a run of the same
    realization at double resolution) whether that maximum is stable."""
    hist = traj.sup_norm_history
    mx = float(hist.max()) if hist.size else 0.0
    arg = int(hist.argmax()) if hist.size else 0
    if refined is None:
        return BoundednessReport(mx, arg, traj.bounded_flag)
    rmx = refined.max_sup_norm
    stable = abs(rmx - mx) <= tolerance * max(mx, rmx, np.finfo(float).tiny)
    return BoundednessReport(mx, arg, traj.bounded_flag, rmx, bool(stable))
