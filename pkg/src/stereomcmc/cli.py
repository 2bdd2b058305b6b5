"""Command-line harness: ``stereomcmc run | plot | verify | presets list``.

Exit codes: 0 success, 1 a verification check is broken, 2 configuration or
usage error, 3 numerical abort (a diagnostic bundle is written next to the
outputs).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .adaptation import AdaptationAbort, EpochSchedule, ParamBounds, air_run
from .config import DEFAULTS_HELP, PRESETS, ConfigError, ExperimentConfig, load_config, preset_config
from .diagnostics import batch_means, clip, ess
from .experiments import thread_cap
from .geometry import Precondition, SingularityError
from .hmc import HmcConfig, hmc_run
from .output import (
    EVENTS_COLUMNS,
    PARAMS_COLUMNS,
    TRACE_COLUMNS,
    event_rows,
    params_rows,
    read_csv_column,
    svg_line_plot,
    trace_rows,
    write_csv,
)
from .rng import GENERATOR, make_rng
from .sbps import SbpsConfig
from .sss import ShrinkError
from .targets import affine_wrap, gaussian_target, student_t_target
from .trace import concat_traces
from .verify import SUITES, run_suite

log = logging.getLogger("stereomcmc")

EXIT_OK, EXIT_BROKEN, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def build_target(cfg: ExperimentConfig):
    if cfg.target_kind == "student_t":
        target = student_t_target(cfg.dof, cfg.d)
    else:
        target = gaussian_target(cfg.mean, cfg.variance)
    if cfg.shift is not None or cfg.scale is not None:
        linear = None if cfg.scale is None else cfg.scale * np.eye(cfg.d)
        target = affine_wrap(target, cfg.shift, linear)
    return target


def initial_point(cfg: ExperimentConfig, rng):
    if isinstance(cfg.start, np.ndarray):
        return cfg.start.copy()
    if cfg.start == "center":
        return cfg.mu0.copy()
    u = rng.standard_normal(cfg.d)
    return cfg.mu0 + np.sqrt(cfg.sigma0_scale) * u / np.linalg.norm(u)


def _write_bundle(out_dir, bundle):
    path = os.path.join(out_dir, "abort_bundle.json")
    clean = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in bundle.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean, fh, indent=1)
    return path


def _summary_lines(cfg, x1, clipped):
    lines = []
    if len(x1) >= 8:
        vals = clip(x1, cfg.clip) if clipped else x1
        bm = batch_means(vals) if len(vals) >= 8 else None
        tag = f" (clipped to [-{cfg.clip:g}, {cfg.clip:g}])" if clipped else ""
        lines.append(f"x1_mean{tag} = {float(np.mean(vals))!r}")
        lines.append(f"x1_var{tag} = {float(np.var(vals))!r}")
        lines.append(f"x1_ess = {ess(vals)!r}")
        if bm is not None:
            lines.append(f"x1_batch_means_se = {bm.std_error!r}")
    return lines


def run_experiment(cfg: ExperimentConfig, out_dir):
    """Run one configured experiment and write its artifacts. Returns the exit code."""
    os.makedirs(out_dir, exist_ok=True)
    target = build_target(cfg)
    rng = make_rng(cfg.seed)
    x0 = initial_point(cfg, rng)
    tick = time.perf_counter()
    report = [
        f"stereomcmc {__version__}",
        f"schema_version = 1",
        f"rng = {GENERATOR} seeded by SeedSequence([{cfg.seed}, 0])",
        f"target = {cfg.target_kind} d={cfg.d}" + (f" dof={cfg.dof:g}" if cfg.dof else ""),
        f"sampler = {cfg.sampler}",
    ]
    clipped = cfg.target_kind == "student_t"
    if cfg.sampler == "hmc":
        n_steps = int(round(cfg.length))
        try:
            tr, _ = hmc_run(x0, n_steps, HmcConfig(cfg.step_size, cfg.n_leapfrog), target, rng,
                            thin=cfg.thin, time_budget=cfg.time_budget)
        except (FloatingPointError, np.linalg.LinAlgError) as err:
            path = _write_bundle(out_dir, {"sampler": "hmc", "error": repr(err), "x0": x0})
            print(f"numerical abort: {err}; bundle written to {path}", file=sys.stderr)
            return EXIT_NUMERIC
        write_csv(os.path.join(out_dir, "trace.csv"), TRACE_COLUMNS, trace_rows([tr], []))
        write_csv(os.path.join(out_dir, "params.csv"), PARAMS_COLUMNS, [])
        norms = np.linalg.norm(tr.x, axis=1)
        report += [f"step_size = {cfg.step_size!r}", f"n_leapfrog = {cfg.n_leapfrog}",
                   f"steps = {tr.info['steps']}", f"acceptance_rate = {tr.info['acceptance_rate']!r}",
                   f"x0_norm = {float(np.linalg.norm(x0))!r}",
                   f"min_x_norm = {float(norms.min()) if len(norms) else float('nan')!r}"]
        report += _summary_lines(cfg, tr.x1, clipped)
    else:
        p0 = Precondition.isotropic(cfg.d, cfg.sigma0_scale, cfg.mu0)
        if cfg.adapt:
            sched = EpochSchedule(cfg.beta, cfg.rule, cfg.c, cfg.unit)
            n_epochs = cfg.n_epochs
        else:
            sched = EpochSchedule(unit=cfg.length)
            n_epochs = 1
        sbps_cfg = SbpsConfig(cfg.lambda_ref, cfg.tau_w, cfg.n_grid, cfg.safety, cfg.delta)
        try:
            res = air_run(cfg.sampler, target, x0, p0, sched, ParamBounds(cfg.r, cfg.R), n_epochs, rng,
                          h=cfg.h, sbps_cfg=sbps_cfg, adapt=cfg.adapt, thin=cfg.thin,
                          time_budget=cfg.time_budget, store_events=cfg.sampler == "sbps")
        except AdaptationAbort as err:
            path = _write_bundle(out_dir, err.bundle)
            print(f"numerical abort: {err}; bundle written to {path}", file=sys.stderr)
            return EXIT_NUMERIC
        except (SingularityError, ShrinkError, FloatingPointError, np.linalg.LinAlgError) as err:
            path = _write_bundle(out_dir, {"sampler": cfg.sampler, "error": repr(err), "x0": x0})
            print(f"numerical abort: {err}; bundle written to {path}", file=sys.stderr)
            return EXIT_NUMERIC
        write_csv(os.path.join(out_dir, "trace.csv"), TRACE_COLUMNS, trace_rows(res.traces, res.history))
        write_csv(os.path.join(out_dir, "params.csv"), PARAMS_COLUMNS, params_rows(res.history))
        if cfg.sampler == "sbps":
            write_csv(os.path.join(out_dir, "events.csv"), EVENTS_COLUMNS, event_rows(res.events))
        report.append(f"epochs_run = {len(res.traces)}")
        report.append(f"final_mu_norm = {res.history[-1].mu_norm!r}")
        for hp in res.history[:-1]:
            keys = ("acceptance_rate", "mean_iterations", "bounce", "refresh", "violation_fraction")
            extra = " ".join(f"{k}={hp.info[k]:.4g}" for k in keys if k in hp.info)
            report.append(f"epoch {hp.epoch}: mu_norm={hp.mu_norm:.6g} "
                          f"sigma_trace={np.trace(hp.precondition.sigma):.6g} "
                          f"wall_time={hp.wall_time:.3f}s {extra}".rstrip())
        if res.traces:
            all_tr = concat_traces(res.traces)
            report.append(f"max_latitude = {float(np.max(all_tr.latitude))!r}")
            report += _summary_lines(cfg, all_tr.x1, clipped)
    report.append(f"wall_time = {time.perf_counter() - tick:.3f}s")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(report) + "\n")
    print(f"wrote {out_dir}/trace.csv, params.csv, report.txt"
          + (", events.csv" if cfg.sampler == "sbps" else ""))
    return EXIT_OK


# -------------------------------------------------------------------- commands

def cmd_run(args):
    if (args.config is None) == (args.preset is None):
        raise UsageError("give exactly one of --config or --preset")
    if args.full and args.preset is None:
        raise UsageError("--full only applies to --preset")
    cfg = load_config(args.config) if args.config else preset_config(args.preset, args.full)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        cfg.seed = args.seed
    out = args.out or cfg.out
    return run_experiment(cfg, out)


def cmd_plot(args):
    try:
        t, y = read_csv_column(args.trace, args.column)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.trace}") from None
    except KeyError as err:
        raise UsageError(f"unknown or non-numeric column {err.args[0]!r}") from None
    except ValueError as err:
        raise UsageError(str(err)) from None
    try:
        svg = svg_line_plot(t, y, title=f"{args.column} ({os.path.basename(args.trace)})", ylabel=args.column)
    except ValueError as err:
        raise UsageError(str(err)) from None
    out = args.out or os.path.join(os.path.dirname(args.trace) or ".", f"{args.column}.svg")
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args):
    results, seconds = run_suite(args.suite, seed=args.seed or 0)
    lines = [f"suite {args.suite} (seed {args.seed or 0}): {seconds:.1f}s"]
    for r in results:
        lines += r.lines()
    broken = [r.name for r in results if not r.ok]
    lines.append("result: " + ("BROKEN: " + ", ".join(broken) if broken else "ok"))
    text = "\n".join(lines)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"verify_{args.suite}.txt"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return EXIT_BROKEN if broken else EXIT_OK


def cmd_presets(args):
    for name, (desc, _, big) in PRESETS.items():
        print(f"{name:<20} {desc}" + ("  [--full available]" if big else ""))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    parser = _Parser(prog="stereomcmc", description="Stereographic MCMC experiment harness.",
                     epilog=DEFAULTS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run an experiment", epilog=DEFAULTS_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    p_run.add_argument("--config", help="INI experiment file")
    p_run.add_argument("--preset", help="named preset (see 'presets list')")
    p_run.add_argument("--full", action="store_true", help="original scale for presets that have one")
    p_run.add_argument("--seed", type=int, help="override [run] seed")
    p_run.add_argument("--out", help="override [run] out directory")
    p_run.set_defaults(func=cmd_run)

    p_plot = sub.add_parser("plot", help="render a trace.csv column as SVG")
    p_plot.add_argument("trace", help="path to trace.csv")
    p_plot.add_argument("column", help="numeric column, e.g. x1, latitude or x_norm")
    p_plot.add_argument("--out", help="output SVG path (default: <column>.svg next to the trace)")
    p_plot.set_defaults(func=cmd_plot)

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("suite", choices=SUITES)
    p_ver.add_argument("--seed", type=int, default=0, help="first of the three pinned seeds")
    p_ver.add_argument("--out", help="directory for the report file")
    p_ver.set_defaults(func=cmd_verify)

    p_pre = sub.add_parser("presets", help="preset utilities")
    p_pre.add_argument("action", choices=["list"])
    p_pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        thread_cap()  # reject a malformed STEREO_THREADS before any work starts
        return args.func(args)
    except (ConfigError, UsageError) as err:
        print(f"stereomcmc: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
