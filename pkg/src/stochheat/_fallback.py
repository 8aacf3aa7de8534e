"""Pure numpy/scipy versions of the hot loops.

Signatures mirror the compiled ``_kernels`` extension exactly; see
``_backend`` for how one is chosen.
"""
import numpy as np
import scipy.fft

NAME = "python"

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_ABORT = 2

VARIANT_ZERO = 0
VARIANT_LINEAR = 1
VARIANT_RATIONAL5 = 2
VARIANT_CUBIC = 3

_NORM = np.sqrt(2.0 / np.pi)


def linear_recursion(decay, increments, init):
    """``out[0] = init``, ``out[m + 1] = decay * out[m] + increments[m]``."""
    decay = np.asarray(decay, dtype=float)
    increments = np.asarray(increments, dtype=float)
    m, n = increments.shape
    out = np.empty((m + 1, n))
    out[0] = init
    for i in range(m):
        out[i + 1] = decay * out[i] + increments[i]
    return out


def pointwise(variant, c):
    """The scalar drift ``f`` for a built-in variant code."""
    if variant == VARIANT_ZERO:
        return lambda v: np.zeros_like(v)
    if variant == VARIANT_LINEAR:
        return lambda v: c * v
    if variant == VARIANT_RATIONAL5:
        return lambda v: 5.0 * (1.0 - v) / (1.0 + v * v)
    if variant == VARIANT_CUBIC:
        return lambda v: -(v * v * v)
    raise ValueError(f"unknown variant code {variant}")


def exp_euler(y0, decay, dt, ou, grid, variant, c, abort_level, func=None):
    """Run the exponential-Euler recursion over all rows of ``ou``.

    Returns ``(states, steps_done, status, offending_value)``; on a non-OK
    status only ``states[: steps_done + 1]`` is meaningful.  ``func``
    overrides the built-in ``variant`` with an arbitrary vectorized callable.
    """
    y = np.array(y0, dtype=float)
    decay = np.asarray(decay, dtype=float)
    n = y.size
    ou = np.asarray(ou, dtype=float)[:, :n]
    steps = ou.shape[0] - 1
    states = np.zeros((steps + 1, n))
    states[0] = y
    f = func if func is not None else pointwise(variant, c)
    diagonal = func is None and variant in (VARIANT_ZERO, VARIANT_LINEAR)
    to_grid = _NORM / 2.0
    to_coeffs = 1.0 / (_NORM * (grid + 1))
    buf = np.zeros(grid)
    for m in range(steps + 1):
        buf[:n] = y
        v = scipy.fft.dst(buf, type=1) * to_grid
        vmax = float(np.max(np.abs(v)))
        if not np.isfinite(vmax):
            return states, m, STATUS_NONFINITE, vmax
        if vmax > abort_level:
            return states, m, STATUS_ABORT, vmax
        if m == steps:
            break
        if diagonal:
            drift = c * y if variant == VARIANT_LINEAR else 0.0
        else:
            fv = f(v)
            if not np.all(np.isfinite(fv)):
                return states, m, STATUS_NONFINITE, float("nan")
            drift = scipy.fft.dst(fv, type=1)[:n] * to_coeffs
        y = decay * (y + dt * drift) + (ou[m + 1] - decay * ou[m])
        states[m + 1] = y
    return states, steps, STATUS_OK, 0.0
