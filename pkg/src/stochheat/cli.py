"""Command-line entry point.

Exit codes: 0 success, 2 a validation check failed, 1 usage or runtime error.
"""
import argparse
import datetime
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .covariance import Kernel, assemble_covariance, factorize, regularity_sum
from .errors import StochHeatError
from .harness import load_config, load_preset, preset_names, run_convergence_study
from .io import (
    write_covariance_csv,
    write_errors_csv,
    write_hierarchy,
    write_json,
    write_trajectory_binary,
    write_trajectory_csv,
)
from .noise import OUPath, ou_path_exact, sample_brownian
from .scheme import Nonlinearity, SchemeConfig, boundedness_report, two_mode_initial_condition, simulate
from .spectral import SpectralField
from .validation import noise_check, selftest

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _kernel(args):
    return Kernel("constant") if args.kernel == "constant" else Kernel(args.kernel, args.h)


def _report(results, args, name):
    for r in results:
        print(r.line())
    if args.out:
        payload = {"checks": [r.as_dict() for r in results], "backend": _backend.NAME, "written": _now()}
        write_json(_outdir(args) / f"{name}.json", payload)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_covariance(args):
    cov = assemble_covariance(_kernel(args), args.modes, args.quad_order)
    out = _outdir(args)
    path = out / "covariance.csv"
    write_covariance_csv(path, cov)
    factor = factorize(cov)
    ev = cov.eigenvalues()
    meta = {
        "kernel": cov.kernel.describe(),
        "modes": cov.dim,
        "quad_order": cov.quadrature_order,
        "sigma_sha256": cov.digest(),
        "trace": float(np.trace(cov.entries)),
        "min_eigenvalue": float(ev.min()),
        "max_eigenvalue": float(ev.max()),
        "jitter": factor.jitter_used,
        "warnings": list(cov.warnings),
        "written": _now(),
    }
    if args.rho is not None:
        cuts = [c for c in (25, 50, 100, 200, 400) if c <= cov.dim]
        meta["regularity"] = {str(c): regularity_sum(cov, args.rho, c) for c in cuts}
    write_json(Path(str(path) + ".json"), meta)
    print(f"wrote {path} ({cov.dim * cov.dim} entries, trace {meta['trace']:.6g})")
    for w in cov.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args):
    n = args.modes
    m = args.steps or int(round(n * n * args.T))
    m = max(m, 1)
    F = Nonlinearity.from_name(args.nonlinearity, args.linear_c)
    cfg = SchemeConfig(n, m, args.T, eval_grid=args.grid)
    xi = two_mode_initial_condition(n) if args.initial == "two_mode" else SpectralField(np.zeros(n))
    out = _outdir(args)
    extra = {"seed": args.seed, "backend": _backend.NAME}
    if args.noise == "on":
        cov = assemble_covariance(_kernel(args), n, args.quad_order)
        h = sample_brownian(factorize(cov), m, args.T, args.seed)
        ou = ou_path_exact(h)
        extra["kernel"] = cov.kernel.describe()
        if args.save_noise:
            write_hierarchy(out / "hierarchy.bin", h)
    else:
        ou = OUPath.zero(n, m, args.T / m)
    traj = simulate(cfg, F, xi, ou, cap=args.cap)
    write_trajectory_csv(out / "trajectory.csv", traj, every=args.every, extra=extra)
    if args.binary:
        write_trajectory_binary(out / "trajectory.bin", traj, extra=extra)
    rep = boundedness_report(traj)
    print(
        f"N={n} M={m} T={args.T:g} status={traj.status} max_sup={rep.max_sup_norm:.6g} "
        f"at step {rep.argmax_step} bounded={rep.bounded}"
    )
    if traj.status != "ok":
        print(f"diverged: {traj.message}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def _parse_assignments(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise StochHeatError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _band(text):
    try:
        lo, hi = sorted(float(v) for v in text.replace(":", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return lo, hi


def cmd_converge(args):
    if args.list_presets:
        print("\n".join(preset_names()))
        return EXIT_OK
    overrides = _parse_assignments(args.set)
    if args.seeds:
        overrides["seeds"] = args.seeds
    if args.config:
        cfg = load_config(Path(args.config), overrides)
    else:
        cfg = load_preset(args.preset, overrides)
    if args.seed is not None and not args.seeds:
        cfg = cfg.replace(seeds=tuple(args.seed + i for i in range(len(cfg.seeds))))
    t0 = time.perf_counter()
    study = run_convergence_study(cfg, threads=args.threads)
    elapsed = time.perf_counter() - t0
    out = _outdir(args)
    write_errors_csv(out / "errors.csv", study.records, include_runtime=args.timings)
    rates = study.rates_payload()
    write_json(out / "rates.json", rates)
    meta = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.as_dict().items()},
        "backend": _backend.NAME,
        "version": __version__,
        "threads": args.threads,
        "elapsed_s": elapsed,
        "runtimes_s": {f"{r.seed}/{r.N}": r.runtime for r in study.records},
        "mean_errors": {str(k): v for k, v in study.mean_errors().items()},
        "written": _now(),
    }
    write_json(out / "study.json", meta)
    for s in study.seeds:
        slope = f"{s.fit.slope:.4f}" if s.fit else f"n/a ({s.fit_error})"
        print(f"seed {s.seed}: slope {slope} well_resolved={s.well_resolved}")
    if study.pooled:
        p = study.pooled
        print(f"pooled slope {p.slope:.4f} (residual {p.residual:.3g}, {p.points} points)")
    else:
        print(f"pooled fit unavailable: {study.pooled_error}")
    if study.diverged:
        print(f"diverged runs (seed, N): {study.diverged}", file=sys.stderr)
    print(f"wrote {out / 'errors.csv'} and {out / 'rates.json'} in {elapsed:.1f}s")
    if args.expect_slope:
        lo, hi = args.expect_slope
        need = args.min_seeds if args.min_seeds is not None else len(study.seeds)
        hits = study.slopes_in_band(lo, hi)
        ok = hits >= need and not study.diverged
        print(f"{'PASS' if ok else 'FAIL'} slope band [{lo}, {hi}]: {hits}/{len(study.seeds)} seeds (need {need})")
        return EXIT_OK if ok else EXIT_FAILED
    return EXIT_FAILED if study.diverged else EXIT_OK


def cmd_noise_check(args):
    results = noise_check(
        kernel=_kernel(args),
        samples=args.samples,
        substeps=args.substeps,
        seed=args.seed or 0,
        oracle_seed=args.oracle_seed,
        quad_order=args.quad_order,
    )
    return _report(results, args, "noise_check")


def cmd_selftest(args):
    return _report(selftest(), args, "selftest")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="random seed (subcommand-specific meaning)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent runs")
    return p


def _noise_flags(p):
    p.add_argument("--kernel", choices=["q1", "q2", "constant"], default="q2")
    p.add_argument("--h", type=float, default=0.1, help="kernel width")
    p.add_argument("--quad-order", type=int, default=512)


def build_parser():
    common = _common()
    parser = _Parser(prog="stochheat", description="Spectral Galerkin solver for the stochastic heat equation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("covariance", parents=[common], help="assemble and export the mode covariance")
    _noise_flags(p)
    p.add_argument("--modes", type=int, default=100)
    p.add_argument("--rho", type=float, default=None, help="also record regularity partial sums")
    p.set_defaults(func=cmd_covariance, out_default=".")

    p = sub.add_parser("simulate", parents=[common], help="run one trajectory")
    _noise_flags(p)
    p.add_argument("--modes", "-N", type=int, default=64)
    p.add_argument("--steps", "-M", type=int, default=None, help="time steps (default N^2 T)")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--nonlinearity", default="rational5", choices=["zero", "linear", "rational5", "cubic"])
    p.add_argument("--linear-c", type=float, default=1.0)
    p.add_argument("--noise", choices=["on", "off"], default="on")
    p.add_argument("--initial", choices=["two_mode", "zero"], default="two_mode")
    p.add_argument("--grid", type=int, default=None, help="evaluation grid size (default 4N+1)")
    p.add_argument("--every", type=int, default=1, help="write every k-th step")
    p.add_argument("--cap", type=float, default=50.0)
    p.add_argument("--binary", action="store_true", help="also write coefficient binary")
    p.add_argument("--save-noise", action="store_true", help="also write the Brownian hierarchy")
    p.set_defaults(func=cmd_simulate, out_default=".")

    p = sub.add_parser("converge", parents=[common], help="pathwise convergence study")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", default="example1")
    src.add_argument("--config", default=None, help="study file with [study]/[noise]/[scheme]/[reference]")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seeds", default=None, help="comma-separated seed list")
    p.add_argument("--timings", action="store_true", help="record runtimes in errors.csv")
    p.add_argument("--expect-slope", type=_band, default=None, metavar="LO,HI")
    p.add_argument("--min-seeds", type=int, default=None, help="seeds needed inside the band")
    p.add_argument("--list-presets", action="store_true")
    p.set_defaults(func=cmd_converge, out_default="results")

    p = sub.add_parser("noise-check", parents=[common], help="Monte-Carlo validation of the samplers")
    _noise_flags(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--substeps", type=int, default=10_000)
    p.add_argument("--oracle-seed", type=int, default=20240611)
    p.set_defaults(func=cmd_noise_check, out_default=None)

    p = sub.add_parser("selftest", parents=[common], help="fast invariant suite")
    p.set_defaults(func=cmd_selftest, out_default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    if args.out is None:
        args.out = args.out_default
    if args.seed is None and args.func is cmd_simulate:
        args.seed = 0
    try:
        return args.func(args)
    except (StochHeatError, ValueError, OSError) as exc:
        print(f"stochheat: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
