"""Data files: CSV exports, binary arrays with JSON sidecars.

Binary layout (all little-endian): 8-byte magic, uint64 rows, uint64 cols,
then ``rows * cols`` float64 values row-major.  The sidecar is the same
path with ``.json`` appended.  CSV floats are printed with 17 significant
digits so values round-trip exactly.
"""
import csv
import datetime
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

HIERARCHY_MAGIC = b"SHBROWN1"
TRAJECTORY_MAGIC = b"SHTRAJC1"
_HEADER = struct.Struct("<8sQQ")


def fmt(x) -> str:
    return f"{float(x):.17g}"


def _sidecar(path):
    return Path(str(path) + ".json")


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_matrix(path, magic, array, metadata):
    a = np.ascontiguousarray(array, dtype="<f8")
    if a.ndim != 2:
        raise ConfigurationError("binary export expects a 2-D array")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, a.shape[0], a.shape[1]))
        fh.write(a.tobytes())
    meta = dict(metadata)
    meta.setdefault("format", magic.decode())
    meta["written"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    write_json(_sidecar(path), meta)


def read_matrix(path, magic):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigurationError(f"{path}: truncated header")
        tag, rows, cols = _HEADER.unpack(head)
        if tag != magic:
            raise ConfigurationError(f"{path}: bad magic {tag!r}, expected {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ConfigurationError(f"{path}: expected {rows * cols} values, found {data.size}")
    side = _sidecar(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return data.reshape(rows, cols).astype(float), meta


def write_hierarchy(path, h):
    """Store a root hierarchy's increments plus provenance metadata."""
    cov = h.factor.covariance
    meta = {
        "seed": h.seed,
        "steps": h.steps,
        "modes": h.modes,
        "T": h.T,
        "kernel": cov.kernel.describe() if cov is not None and cov.kernel else None,
        "sigma_sha256": cov.digest() if cov is not None else None,
        "jitter": h.factor.jitter_used,
        "noise_hash": h.digest(),
    }
    write_matrix(path, HIERARCHY_MAGIC, h.increments, meta)


def read_hierarchy(path, factor=None):
    """Load increments; with ``factor`` rebuild a :class:`BrownianHierarchy`.

    The factor's covariance digest must match the stored one.
    """
    from .noise import BrownianHierarchy

    inc, meta = read_matrix(path, HIERARCHY_MAGIC)
    if factor is None:
        return inc, meta
    cov = factor.covariance
    stored = meta.get("sigma_sha256")
    if stored and cov is not None and cov.digest() != stored:
        raise ConfigurationError(f"{path}: covariance digest does not match the given factor")
    return BrownianHierarchy(factor, int(meta["steps"]), float(meta["T"]), int(meta["seed"]), inc)


def _trajectory_meta(traj, extra=None):
    cfg = traj.config
    meta = {
        "steps": traj.steps,
        "modes": traj.modes,
        "dt": traj.dt,
        "status": traj.status,
        "message": traj.message,
        "cap": traj.cap,
        "bounded": traj.bounded_flag,
        "max_sup_norm": traj.max_sup_norm,
        "noise_hash": traj.noise_hash,
        "nonlinearity": traj.nonlinearity,
    }
    if cfg is not None:
        meta["config"] = {
            "N": cfg.N,
            "M": cfg.M,
            "T": cfg.T,
            "dealias_grid": cfg.dealias_grid,
            "eval_grid": cfg.eval_grid,
        }
    meta.update(extra or {})
    return meta


def write_trajectory_binary(path, traj, extra=None):
    write_matrix(path, TRAJECTORY_MAGIC, traj.coefficients, _trajectory_meta(traj, extra))


def read_trajectory_binary(path):
    return read_matrix(path, TRAJECTORY_MAGIC)


def write_trajectory_csv(path, traj, num_points=None, every=1, extra=None):
    """Rows ``t, x_1..x_G``: grid values of every ``every``-th state."""
    from .spectral import synthesize

    g = num_points or traj.eval_grid
    idx = np.arange(0, traj.steps + 1, every)
    if idx[-1] != traj.steps:
        idx = np.append(idx, traj.steps)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{j}" for j in range(1, g + 1)])
        for lo in range(0, idx.size, 1024):
            chunk = idx[lo : lo + 1024]
            vals = synthesize(traj.coefficients[chunk], g)
            for m, row in zip(chunk, vals):
                w.writerow([fmt(m * traj.dt)] + [fmt(v) for v in row])
    meta = _trajectory_meta(traj, extra)
    meta.update(grid_points=g, every=every)
    meta["written"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    write_json(_sidecar(path), meta)


def write_covariance_csv(path, cov):
    s = cov.entries
    n = cov.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "l", "value"])
        for k in range(n):
            for l in range(n):
                w.writerow([k + 1, l + 1, fmt(s[k, l])])


def read_covariance_csv(path):
    rows = list(csv.DictReader(open(path, newline="")))
    n = max(int(r["k"]) for r in rows)
    s = np.zeros((n, n))
    for r in rows:
        s[int(r["k"]) - 1, int(r["l"]) - 1] = float(r["value"])
    return s


ERRORS_HEADER = ["seed", "N", "M", "sup_error", "runtime_s"]


def write_errors_csv(path, records, include_runtime=False):
    """``seed,N,M,sup_error,runtime_s``.  Runtimes are written as ``nan``
    unless requested, keeping the file byte-reproducible."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ERRORS_HEADER)
        for r in records:
            rt = fmt(r.runtime) if include_runtime else "nan"
            w.writerow([r.seed, r.N, r.M, fmt(r.sup_error), rt])


def read_errors_csv(path):
    with open(path, newline="") as fh:
        return [
            {
                "seed": int(r["seed"]),
                "N": int(r["N"]),
                "M": int(r["M"]),
                "sup_error": float(r["sup_error"]),
                "runtime_s": float(r["runtime_s"]),
            }
            for r in csv.DictReader(fh)
        ]
