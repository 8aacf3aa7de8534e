"""Mode-space covariance of translation-invariant noise kernels.

The noise covariance in the sine basis is

    Sigma[k, l] = int_0^pi int_0^pi e_k(x) e_l(y) q(x - y) dy dx.

Substituting ``r = x - y`` and using that ``q`` is even folds this into a
one-dimensional integral over ``r in [0, s]`` (``s`` the kernel support):

    Sigma[k, l] = (2/pi) int_0^s q(r) (J_kl(r) + J_lk(r)) dr,
    J_kl(r)     = int_r^pi sin(kx) sin(l(x - r)) dx,

where ``J`` has a closed form.  The remaining integral is done with
composite Gauss-Legendre panels between the kernel's kinks, so
piecewise-linear kernels are integrated without the accuracy stall a
tensor rule shows across the ``|x - y| = s`` ridge.
"""
import functools
import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, DomainError, FactorizationError

__all__ = [
    "Kernel",
    "CovarianceMatrix",
    "CovarianceFactor",
    "QuadratureWarning",
    "kernel_eval",
    "assemble_covariance",
    "regularity_sum",
    "factorize",
]

VARIANTS = ("triangular_scaled", "triangular", "constant", "tabulated")
_ALIASES = {"q1": "triangular_scaled", "q2": "triangular"}

_PANEL_NODES = 16
_CONVERGENCE_RTOL = 1e-6


class QuadratureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Kernel:
    """Even, translation-invariant correlation function ``q(r)``.

    ``triangular_scaled`` (q1) is ``(1/h) max(0, 1 - |r|/h^2)``,
    ``triangular`` (q2) is ``max(0, 1 - |r|/h)`` and ``constant`` is 1.
    ``tabulated`` interpolates ``table = (r_nodes, values)`` linearly on
    ``r >= 0`` and extends it evenly.
    """

    variant: str
    h: float = 1.0
    table: tuple = None

    def __post_init__(self):
        v = _ALIASES.get(self.variant, self.variant)
        if v not in VARIANTS:
            raise ConfigurationError(f"unknown kernel variant {self.variant!r}")
        object.__setattr__(self, "variant", v)
        if v in ("triangular_scaled", "triangular") and not self.h > 0:
            raise ConfigurationError(f"bandwidth h must be positive, got {self.h}")
        if v == "tabulated":
            if self.table is None:
                raise ConfigurationError("tabulated kernel needs a table")
            r, q = (np.asarray(a, dtype=float) for a in self.table)
            if r.ndim != 1 or r.shape != q.shape or r.size < 2:
                raise ConfigurationError("table must be two equal-length 1-D arrays")
            if r[0] != 0.0 or np.any(np.diff(r) <= 0):
                raise ConfigurationError("table nodes must start at 0 and increase")
            object.__setattr__(self, "table", (tuple(r), tuple(q)))

    @classmethod
    def q1(cls, h):
        return cls("triangular_scaled", h)

    @classmethod
    def q2(cls, h):
        return cls("triangular", h)

    @property
    def support(self) -> float:
        """Half-width of the support, clipped to pi."""
        if self.variant == "triangular_scaled":
            return min(self.h**2, np.pi)
        if self.variant == "triangular":
            return min(self.h, np.pi)
        if self.variant == "tabulated":
            return min(self.table[0][-1], np.pi)
        return np.pi

    def breakpoints(self):
        """Kinks of ``q`` on ``[0, support]``, endpoints included."""
        s = self.support
        if self.variant == "tabulated":
            r = np.asarray(self.table[0])
            pts = np.concatenate([r[r < s], [s]])
        else:
            pts = np.array([0.0, s])
        return np.unique(pts)

    def describe(self) -> str:
        if self.variant == "tabulated":
            return f"tabulated[{len(self.table[0])}]"
        if self.variant == "constant":
            return "constant"
        return f"{self.variant}(h={self.h!r})"

    def __call__(self, r):
        return kernel_eval(self, r)


def kernel_eval(kernel: Kernel, r):
    """Evaluate ``q(r)``; zero outside the support."""
    a = np.abs(np.asarray(r, dtype=float))
    v = kernel.variant
    if v == "triangular_scaled":
        out = np.maximum(0.0, 1.0 - a / kernel.h**2) / kernel.h
    elif v == "triangular":
        out = np.maximum(0.0, 1.0 - a / kernel.h)
    elif v == "constant":
        out = np.ones_like(a)
    else:
        nodes, vals = kernel.table
        if np.any(a > nodes[-1]):
            raise DomainError(
                f"|r| = {a.max():g} outside tabulated range [0, {nodes[-1]:g}]"
            )
        out = np.interp(a, nodes, vals)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric ``N x N`` matrix ``<Q e_k, e_l>`` with its provenance."""

    entries: np.ndarray
    kernel: Kernel = None
    quadrature_order: int = 0
    warnings: tuple = ()

    def __post_init__(self):
        s = np.array(self.entries, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ConfigurationError(f"covariance must be square, got {s.shape}")
        s.flags.writeable = False
        object.__setattr__(self, "entries", s)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def truncate(self, n):
        return CovarianceMatrix(
            self.entries[:n, :n], self.kernel, self.quadrature_order, self.warnings
        )

    def digest(self) -> str:
        """SHA-256 of the little-endian entries, for noise provenance."""
        return hashlib.sha256(self.entries.astype("<f8").tobytes()).hexdigest()

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True, eq=False)
class CovarianceFactor:
    """Lower-triangular ``L`` with ``L L^T = Sigma + jitter I``."""

    lower_triangular: np.ndarray
    jitter_used: float = 0.0
    covariance: CovarianceMatrix = field(default=None, repr=False)

    def __post_init__(self):
        a = np.array(self.lower_triangular, dtype=float)
        a.flags.writeable = False
        object.__setattr__(self, "lower_triangular", a)

    @property
    def dim(self) -> int:
        return self.lower_triangular.shape[0]

    def reconstruction_error(self) -> float:
        if self.covariance is None:
            raise ConfigurationError("factor carries no covariance to compare with")
        L = self.lower_triangular
        target = self.covariance.entries + self.jitter_used * np.eye(self.dim)
        return float(np.max(np.abs(L @ L.T - target)))


def _antiderivative_cos(omega, phase, a, b):
    """``int_a^b cos(omega x + phase) dx`` for integer ``omega``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.sin(omega * b + phase) - np.sin(omega * a + phase)) / omega
    return np.where(omega == 0, (b - a) * np.cos(phase), val)


def _overlap_integrals(k, l, r):
    """``J_kl(r) + J_lk(r)`` for ``r >= 0``; ``k``, ``l``, ``r`` broadcast."""
    a = r
    b = np.pi
    # sin(kx) sin(l(x - r)) = (cos((k-l)x + lr) - cos((k+l)x - lr)) / 2
    j_kl = _antiderivative_cos(k - l, l * r, a, b) - _antiderivative_cos(k + l, -l * r, a, b)
    j_lk = _antiderivative_cos(l - k, k * r, a, b) - _antiderivative_cos(k + l, -k * r, a, b)
    return 0.5 * (j_kl + j_lk)


def _nodes(kernel, n, quad_order):
    """Composite Gauss-Legendre nodes/weights on ``[0, support]``."""
    x, w = leggauss(_PANEL_NODES)
    pts = kernel.breakpoints()
    rs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        length = hi - lo
        # Panel width capped at 4/(2n) keeps (k+l) r oscillations resolved.
        panels = max(quad_order // _PANEL_NODES, int(np.ceil(length * 2 * n / 4.0)), 1)
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        rs.append((mid[:, None] + half[:, None] * x).ravel())
        ws.append((half[:, None] * w).ravel())
    return np.concatenate(rs), np.concatenate(ws)


@functools.lru_cache(maxsize=16)
def _assemble(kernel, n, quad_order, chunk=128):
    r, w = _nodes(kernel, n, quad_order)
    qw = kernel_eval(kernel, r) * w
    iu, ju = np.triu_indices(n)
    # Reflection x -> pi - x flips e_k by (-1)^(k+1): odd k+l entries vanish.
    same = (iu + ju) % 2 == 0
    iu, ju = iu[same], ju[same]
    k = (iu + 1.0)[:, None]
    l = (ju + 1.0)[:, None]
    upper = np.zeros(iu.size)
    # Fixed chunk order keeps the reduction bit-reproducible.
    for start in range(0, r.size, chunk):
        sl = slice(start, start + chunk)
        upper += _overlap_integrals(k, l, r[None, sl]) @ qw[sl]
    sigma = np.zeros((n, n))
    sigma[iu, ju] = upper
    sigma[ju, iu] = upper
    sigma *= 2.0 / np.pi
    sigma.flags.writeable = False
    return sigma


def assemble_covariance(kernel: Kernel, n: int, quad_order: int = 512, check=True):
    """Assemble ``Sigma`` for the first ``n`` modes.

    With ``check`` the assembly is repeated at doubled ``quad_order`` and
    entries moving by more than 1e-6 (relative to ``max|Sigma|``) are
    reported in :attr:`CovarianceMatrix.warnings`.
    """
    if n < 1:
        raise ConfigurationError(f"need at least one mode, got {n}")
    if quad_order < 64:
        raise ConfigurationError(f"quad_order must be >= 64, got {quad_order}")
    sigma = _assemble(kernel, n, quad_order)
    notes = []
    if check:
        fine = _assemble(kernel, n, 2 * quad_order)
        scale = max(np.max(np.abs(fine)), np.finfo(float).tiny)
        change = np.abs(fine - sigma) / scale
        if change.max() > _CONVERGENCE_RTOL:
            k, l = np.unravel_index(np.argmax(change), change.shape)
            msg = (
                f"quadrature not converged: entry ({k + 1},{l + 1}) moved by "
                f"{change.max():.2e} relative when quad_order doubled"
            )
            notes.append(msg)
            warnings.warn(msg, QuadratureWarning, stacklevel=2)
    return CovarianceMatrix(sigma, kernel, quad_order, tuple(notes))


def regularity_sum(cov: CovarianceMatrix, rho: float, cutoff: int) -> float:
    """Partial sum ``sum_{i,j <= cutoff} i^(rho-1) j^(rho-1) |Sigma_ij|``."""
    if cutoff > cov.dim:
        raise ConfigurationError(f"cutoff {cutoff} exceeds matrix size {cov.dim}")
    wgt = np.arange(1, cutoff + 1, dtype=float) ** (rho - 1.0)
    return float(wgt @ np.abs(cov.entries[:cutoff, :cutoff]) @ wgt)


def _semidefinite_cholesky(a):
    """Outer-product Cholesky that zeroes columns at numerically null pivots.

    Returns None when a clearly negative pivot shows ``a`` is not PSD.
    """
    n = a.shape[0]
    work = np.array(a, dtype=float)
    out = np.zeros_like(work)
    tol = n * np.finfo(float).eps * max(np.max(np.abs(np.diag(a))), 0.0)
    for j in range(n):
        d = work[j, j]
        if d > tol:
            col = work[j:, j] / np.sqrt(d)
            out[j:, j] = col
            work[j:, j:] -= np.outer(col, col)
        elif d < -tol:
            return None
    return out


def factorize(cov: CovarianceMatrix, max_relative_jitter=1e-8) -> CovarianceFactor:
    """Cholesky factor with jitter escalation.

    Tries no jitter first (LAPACK, then a pivot-tolerant variant for
    exactly singular matrices), then ``1e-14 max|Sigma|`` multiplied by 10
    per attempt up to ``max_relative_jitter max|Sigma|``.
    """
    s = cov.entries
    n = cov.dim
    scale = float(np.max(np.abs(s))) if s.size else 0.0
    if scale == 0.0:
        return CovarianceFactor(np.zeros_like(s), 0.0, cov)
    bound = 1e-10 * (1.0 + scale)
    try:
        return CovarianceFactor(np.linalg.cholesky(s), 0.0, cov)
    except np.linalg.LinAlgError:
        pass
    lower = _semidefinite_cholesky(s)
    if lower is not None and np.max(np.abs(lower @ lower.T - s)) <= bound:
        return CovarianceFactor(lower, 0.0, cov)
    jitter = 1e-14 * scale
    while jitter <= max_relative_jitter * scale * (1 + 1e-12):
        try:
            lower = np.linalg.cholesky(s + jitter * np.eye(n))
            return CovarianceFactor(lower, jitter, cov)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    lam_min = float(np.linalg.eigvalsh(s)[0])
    raise FactorizationError(
        f"covariance not positive semidefinite within jitter ceiling; "
        f"most negative eigenvalue {lam_min:.3e}",
        min_eigenvalue=lam_min,
    )
