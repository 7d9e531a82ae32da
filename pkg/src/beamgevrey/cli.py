"""Command-line harness.

Every subcommand writes into a fresh run directory (assembled in a
temporary sibling and renamed into place on completion) holding
``manifest.json``, the resolved ``config.ini``, CSV tables and a
``report.jsonl`` stream. Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error (nothing written), 3 lemma violation.
"""
import argparse
import csv
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
import time

import numpy as np

from . import __version__, kernels
from . import config as configmod
from .analyticity import (
    continuation_radius,
    lower_bound_curve,
    modified_energy,
    sigma_drift_sweep,
    track_radius_over_time,
)
from .config import ConfigError

log = logging.getLogger("beamgevrey")

SCHEMA_VERSION = 1
SCHEMAS = {
    "energy.csv": (["time", "kinetic", "bending", "mass", "potential", "total"],
                   ["time", "energy", "energy", "energy", "energy", "energy"]),
    "drift.csv": (["sigma", "delta", "sup_drift", "ratio"],
                  ["length", "time", "energy", "dimensionless"]),
    "drift_fit.csv": (["slope", "intercept", "ratio_spread", "checkpoint_spacing", "n_valid"],
                      ["dimensionless", "log energy", "dimensionless", "time", "count"]),
    "radius.csv": (["time", "sigma_est", "residual", "n_modes", "capped"],
                   ["time", "length", "log amplitude", "count", "bool"]),
    "radius_fit.csv": (["sigma0", "E0", "C_fit", "c_hat", "gamma", "c_powerlaw", "verdict"],
                       ["length", "energy", "dimensionless", "length time^1/2",
                        "dimensionless", "length time^gamma", "bool"]),
    "lower_bound.csv": (["time", "sigma_lower"], ["time", "length"]),
}


class LemmaViolation(RuntimeError):
    pass


class _Collect(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class RunWriter:
    """Single writer for one run directory."""

    def __init__(self, path):
        self.path = path
        self.schemas = {}
        self.reports = []

    def table(self, name, rows, columns=None, units=None):
        if columns is None:
            columns, units = SCHEMAS[name]
        with open(os.path.join(self.path, name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_num(x) for x in row])
        self.schemas[name] = {"version": SCHEMA_VERSION, "columns": list(columns),
                              "units": list(units)}

    def report(self, record):
        self.reports.append(json.dumps(record, sort_keys=True))

    def text(self, name, content):
        with open(os.path.join(self.path, name), "w") as fh:
            fh.write(content)


# -- tasks ---------------------------------------------------------------------

def task_simulate(cfg, writer, args):
    traj = cfg.integrate()
    energies = traj.energies()
    e0 = energies[0].total
    writer.table("energy.csv", [(e.time, e.kinetic, e.bending, e.mass, e.potential, e.total)
                                for e in energies])
    drift = max(abs(e.total - e0) for e in energies) / (abs(e0) if e0 else 1.0)
    writer.report({"task": "simulate", "steps": int(round(cfg.scheme.t_final / traj.dt)),
                   "dt": traj.dt, "outputs": len(energies), "max_rel_drift": drift,
                   "warnings": traj.warnings})
    return traj.warnings


def task_sweep_sigma(cfg, writer, args):
    traj = cfg.integrate()
    an = cfg.analyticity
    table = sigma_drift_sweep(traj, an.sigmas, an.delta, workers=args.threads)
    writer.table("drift.csv", [(r.sigma, r.delta, r.sup_drift, r.ratio) for r in table.rows])
    valid = sum(r.valid for r in table.rows)
    writer.table("drift_fit.csv", [(table.slope, table.intercept, table.ratio_spread,
                                    table.checkpoint_spacing, valid)])
    writer.report({"task": "sweep-sigma", "slope": table.slope,
                   "ratio_spread": table.ratio_spread,
                   "checkpoint_spacing": table.checkpoint_spacing,
                   "invalid_rows": [r.sigma for r in table.rows if not r.valid],
                   "fitted_quantities_are_surrogates": True})
    print(f"drift slope {table.slope:.4f}, ratio max/min {table.ratio_spread:.3f}")
    return traj.warnings


def task_track_radius(cfg, writer, args):
    res = track_radius_over_time(cfg, workers=args.threads)
    rows = []
    for t, e in zip(res.times, res.estimates):
        if e is None:
            rows.append((t, np.nan, np.nan, 0, False))
        else:
            rows.append((t, e.sigma_est, e.residual, e.n_modes_used, e.capped))
    writer.table("radius.csv", rows)
    writer.table("radius_fit.csv", [(res.sigma0, res.E0, res.C_fit, res.c_hat, res.gamma,
                                     res.c_powerlaw, res.verdict)])
    writer.table("lower_bound.csv", list(zip(res.times, res.bounds)))
    writer.report({"task": "track-radius", "c_hat": res.c_hat, "gamma": res.gamma,
                   "C_fit": res.C_fit, "E0": res.E0, "sigma0": res.sigma0,
                   "verdict": res.verdict,
                   "estimator_errors": {str(k): v for k, v in sorted(res.errors.items())},
                   "fitted_quantities_are_surrogates": True})
    word = "PASS" if res.verdict else "FAIL"
    print(f"verdict: {word} sigma_est(t) >= min(sigma0, c_hat t^-1/2) at "
          f"{len(res.times)} checkpoints (sigma0={res.sigma0:.6g}, c_hat={res.c_hat:.6g}, "
          f"gamma={res.gamma:.4g})")
    return res.warnings


def task_fit_lower_bound(cfg, writer, args):
    st = cfg.initial_state()
    sigma0 = cfg.sigma0()
    E0 = modified_energy(st, sigma0).value
    C_fit = cfg.lemma_constant(workers=args.threads)
    c_hat = continuation_radius(1.0, E0, C_fit, st.p, np.inf)
    sc = cfg.scheme
    n = int(round(sc.t_final / sc.dt))
    steps = sorted(set(range(0, n + 1, sc.output_stride)) | {n})
    times = [k * sc.t_final / n for k in steps]
    bounds = lower_bound_curve(times, sigma0, c_hat)
    if "track-radius" not in cfg.run.tasks or args.command != "run":
        writer.table("lower_bound.csv", list(zip(times, bounds)))
    writer.report({"task": "fit-lower-bound", "sigma0": sigma0, "E0": E0, "C_fit": C_fit,
                   "c_hat": c_hat, "sigma_T": continuation_radius(sc.t_final, E0, C_fit, st.p,
                                                                  sigma0),
                   "fitted_quantities_are_surrogates": True})
    return []


def task_dump_spectrum(cfg, writer, args):
    st = cfg.initial_state()
    grid = st.grid
    coeffs = np.abs(st.u.coefficients)
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    k = grid.k_index
    rows = []
    with np.errstate(divide="ignore"):
        logs = np.log(coeffs)
    for pos in idx:
        pos = tuple(pos)
        rows.append(tuple(int(k[i]) for i in pos) + (coeffs[pos], logs[pos]))
    cols = [f"k{d}" for d in range(grid.dim)] + ["abs_coeff", "log_abs_coeff"]
    units = ["index"] * grid.dim + ["amplitude", "log amplitude"]
    writer.table("spectrum.csv", rows, cols, units)
    writer.report({"task": "dump-spectrum", "modes": len(rows),
                   "nonzero": int((coeffs > 0).sum())})
    return []


def task_verify_lemmas(cfg, writer, args):
    from .lemmas import lattice_product_identity, run_suite, SUITES
    samples = args.samples if args.samples is not None else 10**6
    seed = args.seed if args.seed is not None else 0
    total = 0
    for name in SUITES:
        rep = run_suite(name, samples, seed, threads=args.threads)
        writer.report(rep.to_dict())
        total += rep.violations
        print(f"{name}: {rep.samples} samples, {rep.violations} violations, "
              f"worst margin {rep.worst_margin:.3e}")
    lat = lattice_product_identity()
    writer.report(lat.to_dict())
    total += lat.violations
    if total:
        raise LemmaViolation(f"{total} lemma violations")
    return []


TASKS = {
    "simulate": task_simulate,
    "sweep-sigma": task_sweep_sigma,
    "track-radius": task_track_radius,
    "fit-lower-bound": task_fit_lower_bound,
    "dump-spectrum": task_dump_spectrum,
    "verify-lemmas": task_verify_lemmas,
}


# -- driver --------------------------------------------------------------------

def _samples(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError("samples must be a positive integer")
    return int(value)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file or bundled config name")
    common.add_argument("--out", help="run directory (default runs/<run.name>)")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--samples", type=_samples, help="samples per lemma suite")
    common.add_argument("--force", action="store_true", help="replace an existing run directory")
    common.add_argument("-q", "--quiet", action="store_true")
    parser = argparse.ArgumentParser(prog="beamgevrey", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run every task listed in run.tasks")
    for name in TASKS:
        sub.add_parser(name, parents=[common], help=f"{name} task")
    sub.add_parser("list-configs", help="print the bundled config names")
    return parser


def _manifest(cfg, args, tasks, writer, warnings, status, error, wall):
    return {
        "package": "beamgevrey",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "kernel_backend": kernels.BACKEND,
        "command": args.command,
        "tasks": list(tasks),
        "config_sha256": cfg.digest() if cfg is not None else None,
        "seed": args.seed if cfg is None else cfg.run.seed,
        "samples": args.samples,
        "schemas": dict(sorted(writer.schemas.items())),
        "warnings": warnings,
        "status": status,
        "error": error,
        "wall_time_s": wall,
    }


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-configs":
        print("\n".join(configmod.bundled_names()))
        return 0
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    cfg = None
    try:
        if args.command == "verify-lemmas":
            cfg = configmod.load(args.config) if args.config else None
            tasks = ["verify-lemmas"]
        else:
            if not args.config:
                raise ConfigError("--config", f"required for {args.command}")
            cfg = configmod.load(args.config)
            tasks = list(cfg.run.tasks) if args.command == "run" else [args.command]
        if cfg is not None and args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if cfg is not None and "sweep-sigma" in tasks and not cfg.analyticity.sigmas:
            raise ConfigError("analyticity.sigmas", "sweep-sigma needs a nonempty list")
        if cfg is not None and ("track-radius" in tasks or "fit-lower-bound" in tasks):
            cfg.sigma0()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    default = cfg.run.name if cfg is not None else "lemmas"
    out = os.path.abspath(args.out or os.path.join("runs", default))
    if os.path.exists(out) and not args.force:
        print(f"error: {out} exists (use --force to replace it)", file=sys.stderr)
        return 2
    parent = os.path.dirname(out)
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".tmp-" + os.path.basename(out) + "-", dir=parent)
    writer = RunWriter(tmp)
    collect = _Collect()
    logging.getLogger().addHandler(collect)
    status, error, code = "ok", None, 0
    warnings = []
    start = time.perf_counter()
    try:
        if cfg is not None:
            writer.text("config.ini", cfg.to_ini())
        for task in tasks:
            warnings.extend(TASKS[task](cfg, writer, args))
    except LemmaViolation as exc:
        status, error, code = "violation", str(exc), 3
    except ConfigError as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        logging.getLogger().removeHandler(collect)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # recorded in the manifest
        status, error, code = "error", f"{type(exc).__name__}: {exc}", 1
        print(f"error: {error}", file=sys.stderr)
    finally:
        logging.getLogger().removeHandler(collect)
    wall = time.perf_counter() - start
    for msg in collect.messages:
        if msg not in warnings:
            warnings.append(msg)
    with open(os.path.join(tmp, "report.jsonl"), "w") as fh:
        for line in writer.reports:
            fh.write(line + "\n")
    manifest = _manifest(cfg, args, tasks, writer, warnings, status, error, wall)
    with open(os.path.join(tmp, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if os.path.exists(out):
        shutil.rmtree(out)
    os.rename(tmp, out)
    if not args.quiet:
        print(f"wrote {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
