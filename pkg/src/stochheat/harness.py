"""Pathwise convergence studies.

For each seed one Brownian hierarchy is sampled at the reference
resolution ``(N_ref, M_ref)``.  The reference trajectory and every ladder
entry are driven by restrictions of the same exact OU path, and the error
is the sup over shared grid times and the evaluation grid of the
difference to the reference (taken at its full mode count).
"""
import configparser
import dataclasses
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .covariance import Kernel, assemble_covariance, factorize
from .errors import ConfigurationError, FitError, NoiseMismatchError
from .noise import OUPath, ou_path_exact, sample_brownian
from .scheme import (
    Nonlinearity,
    SchemeConfig,
    Trajectory,
    two_mode_initial_condition,
    simulate,
)
from .spectral import SpectralField, synthesize

__all__ = [
    "ExperimentConfig",
    "ErrorRecord",
    "RateFit",
    "StudyResult",
    "pathwise_error",
    "fit_rate",
    "run_convergence_study",
    "load_config",
    "load_preset",
    "preset_names",
]

# [section] key -> ExperimentConfig field
_FILE_KEYS = {
    "study": {
        "name": "name",
        "seeds": "seeds",
        "t": "T",
        "ladder": "ladder",
        "dt_rule": "dt_rule",
        "fixed_steps": "fixed_steps",
        "eval_grid": "eval_grid",
    },
    "noise": {"kernel": "kernel", "h": "h", "quad_order": "quad_order", "enabled": "noise"},
    "scheme": {
        "nonlinearity": "nonlinearity",
        "linear_c": "linear_c",
        "initial": "initial",
        "cap": "cap",
        "dealias_factor": "dealias_factor",
    },
    "reference": {"modes": "n_ref", "steps": "m_ref"},
}


def _int_tuple(value):
    if isinstance(value, str):
        return tuple(int(v) for v in value.replace(",", " ").split())
    return tuple(int(v) for v in value)


def _bool(value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {value!r}")


_CASTS = {
    "seeds": _int_tuple,
    "ladder": _int_tuple,
    "T": float,
    "h": float,
    "cap": float,
    "linear_c": float,
    "quad_order": int,
    "n_ref": int,
    "m_ref": int,
    "fixed_steps": int,
    "eval_grid": int,
    "dealias_factor": int,
    "noise": _bool,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a convergence study.

    ``dt_rule = "coupled"`` couples ``M = N^2`` (``dt = T / N^2``) for every
    ladder entry and the reference; ``"fixed"`` uses ``fixed_steps`` for
    the ladder.  ``n_ref`` defaults to twice the top of the ladder.
    """

    name: str = "study"
    kernel: str = "q2"
    h: float = 0.1
    quad_order: int = 512
    nonlinearity: str = "rational5"
    linear_c: float = 1.0
    T: float = 1.0
    ladder: tuple = (16, 32, 64, 128)
    dt_rule: str = "coupled"
    fixed_steps: int = None
    n_ref: int = None
    m_ref: int = None
    seeds: tuple = (0, 1, 2, 3, 4)
    eval_grid: int = None
    dealias_factor: int = None
    cap: float = 50.0
    noise: bool = True
    initial: str = "two_mode"

    def __post_init__(self):
        for name, cast in _CASTS.items():
            v = getattr(self, name)
            if v is not None and not (isinstance(v, str) and v.strip() == ""):
                object.__setattr__(self, name, cast(v))
            elif isinstance(v, str):
                object.__setattr__(self, name, None)
        if not self.ladder:
            raise ConfigurationError("ladder must not be empty")
        if self.dt_rule == "paper":
            object.__setattr__(self, "dt_rule", "coupled")
        if self.dt_rule not in ("coupled", "fixed"):
            raise ConfigurationError(f"dt_rule must be 'coupled' or 'fixed', got {self.dt_rule!r}")
        if self.dt_rule == "fixed" and not self.fixed_steps:
            raise ConfigurationError("dt_rule 'fixed' needs fixed_steps")
        if self.initial not in ("two_mode", "zero"):
            raise ConfigurationError(f"initial must be 'two_mode' or 'zero', got {self.initial!r}")
        if self.n_ref is None:
            object.__setattr__(self, "n_ref", 2 * max(self.ladder))
        if self.m_ref is None:
            object.__setattr__(self, "m_ref", self.steps_for(self.n_ref))
        if self.eval_grid is None:
            object.__setattr__(self, "eval_grid", 4 * self.n_ref + 1)
        if not self.seeds:
            raise ConfigurationError("need at least one seed")
        for n in self.ladder:
            if n > self.n_ref:
                raise ConfigurationError(f"ladder entry {n} exceeds reference modes {self.n_ref}")
            if self.m_ref % self.steps_for(n):
                raise ConfigurationError(
                    f"ladder N={n} needs {self.steps_for(n)} steps, which do not divide M_ref={self.m_ref}"
                )
        Nonlinearity.from_name(self.nonlinearity, self.linear_c)
        self.make_kernel()

    def steps_for(self, n):
        if self.dt_rule == "coupled":
            return n * n
        return self.fixed_steps

    def make_kernel(self) -> Kernel:
        return Kernel("constant") if self.kernel == "constant" else Kernel(self.kernel, self.h)

    def make_nonlinearity(self) -> Nonlinearity:
        return Nonlinearity.from_name(self.nonlinearity, self.linear_c)

    def dealias_grid(self, n):
        if self.dealias_factor is None:
            return None
        return max(self.dealias_factor * n - 1, 2 * n)

    def initial_field(self, n) -> SpectralField:
        if self.initial == "zero":
            return SpectralField(np.zeros(n))
        return two_mode_initial_condition(n)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


def _parse_text(text):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    values = {}
    for section in parser.sections():
        keys = _FILE_KEYS.get(section.lower())
        if keys is None:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            target = keys.get(key.lower())
            if target is None:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            values[target] = raw.strip()
    return values


def _normalize_overrides(overrides):
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    flat = {}
    aliases = {v.lower(): v for v in fields}
    for sec in _FILE_KEYS.values():
        for key, target in sec.items():
            aliases.setdefault(key, target)
    for key, value in (overrides or {}).items():
        k = key.split(".")[-1].lower()
        target = aliases.get(k)
        if target is None:
            raise ConfigurationError(f"unknown config key {key!r}")
        flat[target] = value
    return flat


def load_config(source=None, overrides=None) -> ExperimentConfig:
    """Build a config from a ``key = value`` file (path or text) plus overrides.

    Overrides are ``{key: value}`` using either field names or file keys.
    """
    values = {}
    if source is not None:
        if isinstance(source, Path) or "\n" not in str(source):
            text = Path(source).read_text()
        else:
            text = str(source)
        values.update(_parse_text(text))
    values.update(_normalize_overrides(overrides))
    return ExperimentConfig(**values)


def preset_names():
    root = resources.files("stochheat") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_preset(name, overrides=None) -> ExperimentConfig:
    path = resources.files("stochheat") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return load_config(path.read_text(), overrides)


@dataclass(frozen=True)
class ErrorRecord:
    N: int
    M: int
    seed: int
    sup_error: float
    runtime: float
    reference_hash: str
    status: str = "ok"

    @property
    def usable(self):
        return self.status == "ok" and math.isfinite(self.sup_error) and self.sup_error > 0


@dataclass(frozen=True)
class RateFit:
    """Least-squares line ``log(error) = intercept + slope log(N)``.

    ``residual`` is the root-mean-square misfit in log space.
    """

    slope: float
    intercept: float
    residual: float
    points: int

    def as_dict(self):
        return dataclasses.asdict(self)


def pathwise_error(traj: Trajectory, ref: Trajectory, num_points=None, chunk=2048) -> float:
    """``max_m max_j |Y_m(x_j) - X_ref(m dt, x_j)|`` over shared grid times."""
    if traj.noise_hash is None or traj.noise_hash != ref.noise_hash:
        raise NoiseMismatchError(
            f"trajectories use different noise realizations ({traj.noise_hash} vs {ref.noise_hash})"
        )
    t_traj = traj.steps * traj.dt
    t_ref = ref.steps * ref.dt
    if not math.isclose(t_traj, t_ref, rel_tol=1e-12) or ref.steps % traj.steps:
        raise ConfigurationError("trajectory grid times are not a subset of the reference times")
    stride = ref.steps // traj.steps
    g = num_points or ref.eval_grid
    n = max(traj.modes, ref.modes)
    worst = 0.0
    for lo in range(0, traj.steps + 1, chunk):
        hi = min(lo + chunk, traj.steps + 1)
        diff = np.zeros((hi - lo, n))
        diff[:, : ref.modes] = ref.coefficients[lo * stride : (hi - 1) * stride + 1 : stride]
        diff[:, : traj.modes] -= traj.coefficients[lo:hi]
        worst = max(worst, float(np.max(np.abs(synthesize(diff, g)))))
    return worst


def fit_rate(records) -> RateFit:
    """Fit ``log error`` against ``log N``; needs three usable records.

    Accepts :class:`ErrorRecord` objects or ``(N, error)`` pairs.
    """
    pts = []
    for r in records:
        if isinstance(r, ErrorRecord):
            if r.usable:
                pts.append((r.N, r.sup_error))
        else:
            n, e = r
            if math.isfinite(e) and e > 0:
                pts.append((n, e))
    if len(pts) < 3:
        raise FitError(f"need at least 3 usable points, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    if np.ptp(x) == 0:
        raise FitError("all points share the same N")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ [slope, intercept] - y) ** 2)))
    return RateFit(float(slope), float(intercept), resid, len(pts))


@dataclass
class SeedResult:
    seed: int
    records: list
    noise_hash: str
    reference_ok: bool
    reference_max_sup: float
    half_reference_error: float = None
    fit: RateFit = None
    fit_error: str = ""

    @property
    def well_resolved(self):
        """Half-resolution error at most 25% of the smallest-ladder error."""
        if self.half_reference_error is None or not self.records:
            return None
        base = self.records[0].sup_error
        return bool(self.half_reference_error <= 0.25 * base)


@dataclass
class StudyResult:
    config: ExperimentConfig
    seeds: list = field(default_factory=list)
    pooled: RateFit = None
    pooled_error: str = ""

    @property
    def records(self):
        return [r for s in self.seeds for r in s.records]

    @property
    def diverged(self):
        return [(r.seed, r.N) for r in self.records if r.status != "ok"]

    def per_seed_slopes(self):
        return {s.seed: (s.fit.slope if s.fit else None) for s in self.seeds}

    def slopes_in_band(self, lo, hi):
        return sum(1 for s in self.seeds if s.fit is not None and lo <= s.fit.slope <= hi)

    def mean_errors(self):
        """Mean sup error per ladder entry over seeds with usable records."""
        out = {}
        for n in self.config.ladder:
            errs = [r.sup_error for r in self.records if r.N == n and r.usable]
            out[n] = float(np.mean(errs)) if errs else math.nan
        return out

    def rates_payload(self):
        pooled = self.pooled.as_dict() if self.pooled else {}
        return {
            "slope": pooled.get("slope"),
            "intercept": pooled.get("intercept"),
            "residual": pooled.get("residual"),
            "points": pooled.get("points"),
            "per_seed": [
                {
                    "seed": s.seed,
                    **(s.fit.as_dict() if s.fit else {"slope": None, "error": s.fit_error}),
                    "well_resolved": s.well_resolved,
                    "half_reference_error": s.half_reference_error,
                    "reference_max_sup_norm": s.reference_max_sup,
                    "noise_hash": s.noise_hash,
                }
                for s in self.seeds
            ],
            "diverged": [list(d) for d in self.diverged],
            "study": self.config.name,
        }


def _study_noise(cfg, factor, seed):
    if not cfg.noise:
        return OUPath.zero(cfg.n_ref, cfg.m_ref, cfg.T / cfg.m_ref), "noise-off"
    h = sample_brownian(factor, cfg.m_ref, cfg.T, seed)
    return ou_path_exact(h), h.digest()


def _run(cfg, F, n, ou, backend):
    m = cfg.steps_for(n) if n != cfg.n_ref else cfg.m_ref
    sc = SchemeConfig(n, m, cfg.T, dealias_grid=cfg.dealias_grid(n), eval_grid=cfg.eval_grid)
    return simulate(sc, F, cfg.initial_field(n), ou.restrict(n, m), cap=cfg.cap, backend=backend)


def _run_seed(cfg, factor, seed, backend):
    F = cfg.make_nonlinearity()
    ou, digest = _study_noise(cfg, factor, seed)
    ref = _run(cfg, F, cfg.n_ref, ou, backend)
    result = SeedResult(seed, [], digest, ref.status == "ok", ref.max_sup_norm)
    half = cfg.n_ref // 2
    errors_by_n = {}
    for n in sorted(set(cfg.ladder)):
        t0 = time.perf_counter()
        tr = _run(cfg, F, n, ou, backend)
        if tr.status == "ok" and ref.status == "ok":
            err, status = pathwise_error(tr, ref), "ok"
        else:
            err, status = math.nan, "diverged"
        rec = ErrorRecord(n, tr.steps, seed, err, time.perf_counter() - t0, digest, status)
        result.records.append(rec)
        errors_by_n[n] = err
    if half >= 1 and ref.status == "ok" and cfg.m_ref % cfg.steps_for(half) == 0:
        if half in errors_by_n:
            result.half_reference_error = errors_by_n[half]
        else:
            tr = _run(cfg, F, half, ou, backend)
            if tr.status == "ok":
                result.half_reference_error = pathwise_error(tr, ref)
    try:
        result.fit = fit_rate(result.records)
    except Exception as exc:  # FitError, or degenerate data
        result.fit_error = str(exc)
    return result


def run_convergence_study(cfg: ExperimentConfig, threads=1, backend=None) -> StudyResult:
    """Run every seed of ``cfg``; results are ordered by ``(seed, N)``."""
    cov = assemble_covariance(cfg.make_kernel(), cfg.n_ref, cfg.quad_order)
    factor = factorize(cov)
    seeds = list(cfg.seeds)
    if threads and threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _run_seed(cfg, factor, s, backend), seeds))
    else:
        results = [_run_seed(cfg, factor, s, backend) for s in seeds]
    results.sort(key=lambda s: s.seed)
    study = StudyResult(cfg, results)
    try:
        study.pooled = fit_rate(study.records)
    except FitError as exc:
        study.pooled_error = str(exc)
    return study
