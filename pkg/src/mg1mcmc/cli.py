"""Command line: mg1mcmc {simulate, run, diagnose, reproduce, datasets}.

Exit status is 0 on success, 1 for usage errors and 2 for runtime or
numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .diagnostics import (
    ChainArchive,
    DegenerateChainError,
    act_report,
    efficiency_table,
    format_act_table,
    format_means_table,
    posterior_means,
    write_act_csv,
    write_means_csv,
)
from .kernels import SCHEMES, get_scheme
from .model import Parameters, SupportError
from .presets import SCENARIOS, get_tuning, run_length
from .runner import run_chains
from .simulator import load_dataset, read_dataset, simulate, trajectory, write_dataset
from .datasets import DATASETS

logger = logging.getLogger("mg1mcmc")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _triple(text):
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _positive_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


# ---------------------------------------------------------------------------
# file formats

TRACE_HEADER = ("iteration", "eta1", "eta2", "eta3")


def write_trace(path, iterations, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for it, row in zip(iterations, trace):
            w.writerow([int(it), *(f"{v:.17g}" for v in row)])


def read_trace(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        rows = [[float(c) for c in r] for r in reader if r]
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return arr[:, 0].astype(np.int64), arr[:, 1:]


def _retained_iterations(result, burn_in):
    n_rows = result.retained(burn_in).shape[0]
    total = result.trace.shape[0]
    return (np.arange(total - n_rows, total) + 1) * result.thin


def _write_plot_data(out: Path, traces, iterations, max_points, gnuplot):
    step = max(1, math.ceil(traces[0].shape[0] / max_points))
    path = out / "trace_plot.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("chain",) + TRACE_HEADER)
        for s, (tr, its) in enumerate(zip(traces, iterations)):
            for it, row in zip(its[::step], tr[::step]):
                w.writerow([s, int(it), *(f"{v:.10g}" for v in row)])
    if gnuplot:
        lines = [
            "set datafile separator ','",
            "set key off",
            "set multiplot layout 3,1",
        ]
        for h, name in enumerate(("eta1", "eta2", "eta3")):
            plots = ", ".join(
                f"'trace_plot.csv' every ::1 using ($1=={s} ? $2 : 1/0):{h + 3} with lines" for s in range(len(traces))
            )
            lines += [f"set ylabel '{name}'", f"plot {plots}"]
        lines.append("unset multiplot")
        (out / "trace_plot.gp").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args):
    try:
        theta = Parameters(*args.theta)
    except ValueError as err:
        raise UsageError(str(err)) from None
    sim = simulate(theta, args.n, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(out / "data.csv", sim.y)
    trajectory(sim).to_csv(out / "trajectory.csv")
    with open(out / "latent.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "v", "u", "w"])
        for i, row in enumerate(zip(sim.v.v, sim.u, sim.w), start=1):
            w.writerow([i, *(repr(float(c)) for c in row)])
    print(f"wrote {args.n} interdeparture times to {out / 'data.csv'}")
    return EXIT_OK


def _load_observations(cfg: RunConfig):
    if cfg.data:
        return read_dataset(cfg.data), Path(cfg.data).stem
    return load_dataset(cfg.scenario), cfg.scenario


def _config_from_args(args) -> RunConfig:
    try:
        base = RunConfig.load(args.config) if args.config else RunConfig()
        overrides = {k: getattr(args, k, None) for k in (
            "scenario", "data", "scheme", "tuning", "met_prop_sd", "met_repeats", "sigma2_shift", "c_range",
            "c_rate", "iterations", "chains", "burn_in", "thin", "seed", "jobs", "out", "plot_points",
        )}
        if overrides.get("data"):
            base = RunConfig(**{**base.to_dict(), "scenario": None, "data": overrides["data"]})
        elif overrides.get("scenario"):
            base = RunConfig(**{**base.to_dict(), "data": None, "scenario": overrides["scenario"]})
        cfg = base.updated(**overrides)
        cfg.tuning_params()
    except (ValueError, TypeError) as err:
        raise UsageError(str(err)) from None
    return cfg


def execute_run(cfg: RunConfig, out: Path, *, gnuplot=False, quiet=False):
    """Run the configured chains and write traces, acceptance counts and metadata."""
    obs, name = _load_observations(cfg)
    tuning = cfg.tuning_params()
    spec = get_scheme(cfg.scheme)
    results = run_chains(
        obs, tuning, spec, cfg.iterations, cfg.chains, seed=cfg.seed, thin=cfg.thin, n_jobs=cfg.jobs
    )
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    traces, iters = [], []
    for s, res in enumerate(results):
        tr = res.retained(cfg.burn_in)
        its = _retained_iterations(res, cfg.burn_in)
        write_trace(out / f"chain_{s}.csv", its, tr)
        traces.append(tr)
        iters.append(its)
    with open(out / "acceptance.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chain", "kernel", "proposals", "accepts", "rate"])
        for s, res in enumerate(results):
            for kernel, c in res.stats.to_dict().items():
                if c["proposals"]:
                    w.writerow([s, kernel, c["proposals"], c["accepts"], f"{c['accepts'] / c['proposals']:.6f}"])
    seconds = sum(r.seconds for r in results)
    meta = {
        "dataset": name,
        "n": obs.n,
        "scheme": spec.label,
        "iterations": cfg.iterations,
        "chains": cfg.chains,
        "thin": cfg.thin,
        "burn_in": cfg.burn_in,
        "seconds": seconds,
        "ms_per_iter": 1e3 * seconds / (cfg.iterations * cfg.chains),
        "version": __version__,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    _write_plot_data(out, traces, iters, cfg.plot_points, gnuplot)
    archive = ChainArchive.from_results(results, cfg.burn_in, label=spec.label)
    if not quiet:
        rates = archive.acceptance_rates()
        print(f"{spec.label} on {name}: {cfg.chains} x {cfg.iterations} iterations, "
              f"{meta['ms_per_iter']:.4f} ms/iteration")
        print("acceptance: " + ", ".join(f"{k} {v:.3f}" for k, v in rates.items()))
    return archive


def cmd_run(args):
    cfg = _config_from_args(args)
    execute_run(cfg, Path(cfg.out), gnuplot=args.gnuplot)
    print(f"outputs in {cfg.out}")
    return EXIT_OK


def load_archive(path) -> ChainArchive:
    """A run directory written by ``run``, or a single trace CSV."""
    path = Path(path)
    files = sorted(path.glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1])) if path.is_dir() else [path]
    if not files:
        raise ValueError(f"{path}: no chain_*.csv files")
    traces = [read_trace(f)[1] for f in files]
    if len({t.shape[0] for t in traces}) != 1:
        raise ValueError(f"{path}: chains have different lengths {[t.shape[0] for t in traces]}")
    meta_path = (path if path.is_dir() else path.parent) / "meta.json"
    sec, thin, label = float("nan"), 1, path.stem if not path.is_dir() else path.name
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        sec = meta["ms_per_iter"] / 1e3
        thin = int(meta.get("thin", 1))
        label = meta.get("scheme", label)
    return ChainArchive(np.stack(traces), seconds_per_iter=sec, thin=thin, label=label)


def _report(archives: dict, out: Path | None, baseline="Basic"):
    means = {k: posterior_means(a) for k, a in archives.items()}
    text = ["Posterior means", format_means_table(means)]
    if out:
        out.mkdir(parents=True, exist_ok=True)
        write_means_csv(out / "means.csv", means)
    acts = {}
    failed = None
    for k, a in archives.items():
        try:
            acts[k] = act_report(a)
        except DegenerateChainError as err:
            failed = f"{k}: autocorrelation time undefined ({err})"
    if acts:
        gains = efficiency_table(acts, baseline) if baseline in acts and len(acts) > 1 else None
        text += ["", "Autocorrelation times (time-adjusted in ms)", format_act_table(acts, gains)]
        if out:
            write_act_csv(out / "act.csv", acts)
            if gains:
                with open(out / "efficiency.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["scheme", "parameter", "ratio"])
                    for label, g in gains.items():
                        for name, val in zip(("eta1", "eta2", "eta3"), g):
                            w.writerow([label, name, f"{val:.6g}"])
    report = "\n".join(text)
    if out:
        (out / "report.txt").write_text(report + "\n")
    print(report)
    return failed, acts


def cmd_diagnose(args):
    archives = {}
    for p in args.paths:
        a = load_archive(p)
        if a.n_runs < 2:
            raise UsageError(f"{p}: need at least two chains for standard errors")
        archives[a.label or str(p)] = a
    failed, _ = _report(archives, Path(args.out) if args.out else None)
    if failed:
        print(failed, file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_reproduce(args):
    if args.scale <= 0:
        raise UsageError("scale must be positive")
    out = Path(args.out)
    archives = {}
    rates = {}
    for k, key in enumerate(SCHEMES):
        n_iter = run_length(args.scenario, key, args.scale)
        cfg = RunConfig(
            scenario=args.scenario, scheme=key, iterations=n_iter, chains=args.chains,
            seed=None if args.seed is None else args.seed + k, jobs=args.jobs, out=str(out / key),
        )
        logger.info("%s: %d iterations x %d chains", key, n_iter, args.chains)
        archive = execute_run(cfg, out / key, quiet=True) if args.keep_traces else _run_only(cfg)
        archives[archive.label] = archive
        rates[archive.label] = archive.acceptance_rates()
    failed, _ = _report(archives, out)
    print("\nAcceptance rates")
    with open(out / "acceptance.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "kernel", "rate"])
        for label, r in rates.items():
            print(f"  {label:<14} " + ", ".join(f"{k} {v:.3f}" for k, v in r.items()))
            for kernel, val in r.items():
                w.writerow([label, kernel, f"{val:.6f}"])
    if failed:
        print(failed, file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _run_only(cfg: RunConfig) -> ChainArchive:
    obs, _ = _load_observations(cfg)
    spec = get_scheme(cfg.scheme)
    results = run_chains(obs, cfg.tuning_params(), spec, cfg.iterations, cfg.chains, seed=cfg.seed, n_jobs=cfg.jobs)
    return ChainArchive.from_results(results, cfg.burn_in, label=spec.label)


def cmd_datasets(args):
    if args.action == "list":
        for name, y in DATASETS.items():
            print(f"{name:<13} n={len(y):<3} mean y={np.mean(y):8.3f}  min y={min(y):7.2f}  max y={max(y):7.2f}")
        return EXIT_OK
    if args.name not in DATASETS:
        raise UsageError(f"unknown data set {args.name!r}; choose from {sorted(DATASETS)}")
    obs = load_dataset(args.name)
    if args.action == "show":
        for i, val in enumerate(obs.y, start=1):
            print(f"{i:3d} {val:.2f}")
        return EXIT_OK
    write_dataset(args.out, obs.y)
    print(f"wrote {args.name} to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mg1mcmc", description="Bayesian inference for M/G/1 queues from interdeparture times.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a data set and its queue trajectory")
    p.add_argument("--theta", type=_triple, required=True, help="theta1,theta2,theta3")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="sim")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run chains of one scheme")
    p.add_argument("--config", help="JSON config; flags below override it")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", choices=SCENARIOS)
    src.add_argument("--data", help="CSV with columns index,y")
    p.add_argument("--scheme", choices=sorted(SCHEMES))
    p.add_argument("--tuning", choices=SCENARIOS, help="tuning preset (default: the scenario's)")
    p.add_argument("--met-prop-sd", dest="met_prop_sd", type=_triple)
    p.add_argument("--met-repeats", type=_positive_int)
    p.add_argument("--sigma2-shift", type=float)
    p.add_argument("--c-range", type=float)
    p.add_argument("--c-rate", type=float)
    p.add_argument("--iterations", type=_positive_int)
    p.add_argument("--chains", type=_positive_int)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--thin", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.add_argument("--plot-points", type=_positive_int)
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script for the traces")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("diagnose", help="posterior means and autocorrelation times for run directories")
    p.add_argument("paths", nargs="+", help="run directories (one per scheme) or trace CSVs")
    p.add_argument("--out", help="directory for means.csv, act.csv and report.txt")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("reproduce", help="run all five schemes on a scenario and compare efficiency")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--scale", type=float, default=0.02, help="fraction of the reference run lengths")
    p.add_argument("--chains", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="reproduce")
    p.add_argument("--keep-traces", action="store_true")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("datasets", help="list, show or export the embedded data sets")
    p.add_argument("action", choices=("list", "show", "export"))
    p.add_argument("name", nargs="?")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_datasets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "datasets" and args.action != "list":
            if not args.name:
                parser.error("datasets show/export needs a data set name")
            if args.action == "export" and not args.out:
                parser.error("datasets export needs --out")
    except SystemExit as exc:
        # --help and --version exit 0, parse errors exit 1
        return exc.code
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as err:
        print(f"mg1mcmc: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (SupportError, DegenerateChainError, OSError, ValueError, RuntimeError) as err:
        print(f"mg1mcmc: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
