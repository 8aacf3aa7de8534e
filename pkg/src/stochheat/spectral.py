"""Dirichlet-sine spectral representation on the interval (0, pi).

Fields are stored as coefficient vectors in the orthonormal basis
``e_k(x) = sqrt(2/pi) sin(kx)``, ``k = 1..N``.  The Dirichlet Laplacian acts
diagonally with ``A e_k = -k^2 e_k``, so the heat semigroup multiplies
coefficient ``k`` by ``exp(-k^2 t)``.

Collocation grids are the interior uniform points ``x_j = j pi / (G + 1)``.
On such a grid, synthesis and analysis are both type-I discrete sine
transforms, which is what the fast path uses.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import ConfigurationError, DomainError

__all__ = [
    "NORM",
    "Eigenbasis",
    "SpectralField",
    "CollocationGrid",
    "eigenfunction_eval",
    "project",
    "semigroup_apply",
    "eval_on_grid",
    "grid_to_coeffs",
    "sup_norm",
    "synthesize",
    "analyze",
    "sine_matrix",
]

#: Normalization of the eigenfunctions, ``sqrt(2/pi)``.
NORM = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class Eigenbasis:
    """First ``max_modes`` Dirichlet eigenpairs of ``d^2/dx^2`` on (0, pi)."""

    max_modes: int
    domain_length: float = field(default=np.pi, init=False)

    def __post_init__(self):
        if int(self.max_modes) < 1:
            raise DomainError(f"max_modes must be >= 1, got {self.max_modes}")
        object.__setattr__(self, "max_modes", int(self.max_modes))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        lam = np.arange(1, self.max_modes + 1, dtype=float) ** 2
        lam.flags.writeable = False
        return lam

    def function(self, k, x):
        return eigenfunction_eval(k, x)


def _as_readonly(coefficients):
    c = np.array(coefficients, dtype=float, copy=True).reshape(-1)
    c.flags.writeable = False
    return c


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A function on (0, pi) given by its leading sine coefficients.

    ``coefficients[k - 1]`` multiplies ``e_k``.  Instances are immutable:
    arithmetic returns new fields, zero-padding the shorter operand.
    """

    coefficients: np.ndarray
    basis: Eigenbasis = None

    def __post_init__(self):
        c = _as_readonly(self.coefficients)
        object.__setattr__(self, "coefficients", c)
        if self.basis is None:
            object.__setattr__(self, "basis", Eigenbasis(max(1, c.size)))
        elif c.size > self.basis.max_modes:
            raise ConfigurationError(
                f"{c.size} coefficients exceed basis size {self.basis.max_modes}"
            )

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n))

    @property
    def modes(self) -> int:
        return self.coefficients.size

    def __call__(self, x):
        """Evaluate the field at arbitrary points of [0, pi]."""
        x = np.asarray(x, dtype=float)
        k = np.arange(1, self.modes + 1)
        return NORM * np.sin(np.multiply.outer(x, k)) @ self.coefficients

    def _combine(self, other, op):
        if not isinstance(other, SpectralField):
            return NotImplemented
        n = max(self.modes, other.modes)
        a = np.zeros(n)
        b = np.zeros(n)
        a[: self.modes] = self.coefficients
        b[: other.modes] = other.coefficients
        basis = self.basis if self.basis.max_modes >= n else other.basis
        return SpectralField(op(a, b), basis)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return SpectralField(self.coefficients * float(scalar), self.basis)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.coefficients, self.basis)

    def __repr__(self):
        return f"SpectralField(modes={self.modes})"


@dataclass(frozen=True)
class CollocationGrid:
    """Interior uniform grid ``x_j = j pi / (G + 1)``, ``j = 1..G``."""

    num_points: int

    def __post_init__(self):
        if int(self.num_points) < 1:
            raise ConfigurationError(f"grid needs >= 1 point, got {self.num_points}")
        object.__setattr__(self, "num_points", int(self.num_points))

    @cached_property
    def points(self) -> np.ndarray:
        g = self.num_points
        x = np.arange(1, g + 1) * (np.pi / (g + 1))
        x.flags.writeable = False
        return x


def eigenfunction_eval(k, x):
    """Return ``sqrt(2/pi) sin(kx)``.

    Raises DomainError for ``k < 1`` or ``x`` outside ``[0, pi]``.
    """
    k = np.asarray(k)
    x = np.asarray(x, dtype=float)
    if np.any(k < 1):
        raise DomainError("mode index must be >= 1")
    if np.any(x < 0.0) or np.any(x > np.pi):
        raise DomainError("position must lie in [0, pi]")
    out = NORM * np.sin(k * x)
    # sin(k*pi) is not exactly zero in floating point.
    out = np.where((x == 0.0) | (x == np.pi), 0.0, out)
    return out[()] if out.ndim == 0 else out


def project(f: SpectralField, n: int) -> SpectralField:
    """Orthogonal projection onto the first ``n`` modes.  Never extends."""
    if n < 1:
        raise DomainError(f"projection size must be >= 1, got {n}")
    if n >= f.modes:
        return f
    return SpectralField(f.coefficients[:n], f.basis)


def semigroup_apply(f: SpectralField, t: float) -> SpectralField:
    """Apply the heat semigroup ``S_t``: coefficient ``k`` times ``exp(-k^2 t)``."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    if t == 0:
        return f
    lam = np.arange(1, f.modes + 1, dtype=float) ** 2
    return SpectralField(np.exp(-lam * t) * f.coefficients, f.basis)


def sine_matrix(num_points, n):
    """Dense synthesis matrix ``E[j, k] = e_{k+1}(x_j)`` of shape (G, n)."""
    x = CollocationGrid(num_points).points
    return NORM * np.sin(np.multiply.outer(x, np.arange(1, n + 1)))


def synthesize(coeffs, num_points, method="fast"):
    """Grid values of fields given as coefficient arrays along the last axis.

    ``coeffs`` may be 2-D (one field per row).  ``method`` is ``"fast"``
    (type-I DST) or ``"direct"`` (dense summation).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    if n > num_points:
        coeffs = coeffs[..., :num_points]
        n = num_points
    if method == "direct":
        return coeffs @ sine_matrix(num_points, n).T
    if method != "fast":
        raise ValueError(f"unknown transform method {method!r}")
    padded = np.zeros(coeffs.shape[:-1] + (num_points,))
    padded[..., :n] = coeffs
    return scipy.fft.dst(padded, type=1, axis=-1) * (NORM / 2.0)


def analyze(values, n, method="fast"):
    """First ``n`` discrete sine coefficients of grid samples (last axis)."""
    values = np.asarray(values, dtype=float)
    g = values.shape[-1]
    if g < n:
        raise ConfigurationError(f"grid of {g} points cannot resolve {n} modes")
    if method == "direct":
        return values @ sine_matrix(g, n) * (np.pi / (g + 1))
    if method != "fast":
        raise ValueError(f"unknown transform method {method!r}")
    out = scipy.fft.dst(values, type=1, axis=-1)[..., :n]
    return out / (NORM * (g + 1))


def eval_on_grid(f: SpectralField, grid: CollocationGrid, method="fast"):
    if f.modes == 0:
        raise DomainError("cannot evaluate an empty field")
    return synthesize(f.coefficients, grid.num_points, method)


def grid_to_coeffs(values, grid: CollocationGrid, n: int, method="fast") -> SpectralField:
    """Inverse of :func:`eval_on_grid` for fields with at most ``G`` modes."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.num_points,):
        raise ConfigurationError(
            f"expected {grid.num_points} samples, got shape {values.shape}"
        )
    return SpectralField(analyze(values, n, method))


def sup_norm(f: SpectralField, grid: CollocationGrid) -> float:
    """``max_j |f(x_j)|`` over the collocation grid."""
    if f.modes == 0:
        return 0.0
    return float(np.max(np.abs(eval_on_grid(f, grid))))
