"""Command-line interface: simulation, analysis and lifetime solving.

Rates on the command line are given in units of the free-atom rate
gamma_0 and all reported times are in units of tau_0 = 1/gamma_0; the
--gamma0 flag converts from physical units (rates are divided by it, so
the default of 1 means flags are already unit-scaled).  Commands refuse
to overwrite existing output files unless --overwrite is given, and the
PAIRDECAY_OUTDIR environment variable supplies a default output
directory.

Exit codes: 0 success, 2 invalid arguments or parameters, 3 I/O failure,
4 input schema violation, 5 solver or fit failure, 6 reference-table
regression mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import events_io
from .errors import FitError, ParameterError, SchemaError, SolverError
from .estimate import (
    apparent_lifetime,
    estimate_rates,
    fit_histogram_rate,
    formation_time_bias,
    pipeline_summary,
)
from .kinetics import RateParameters, population_curve
from .lifetime import lifetime_sweep, solve_lifetime
from .simulate import DetectorModel, coincidence_histogram, empirical_populations, simulate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SCHEMA = 4
EXIT_SOLVER = 5
EXIT_MISMATCH = 6

OUTDIR_ENV = "PAIRDECAY_OUTDIR"

# Built-in regression table: (gamma_f/gamma_0, gamma_s/gamma_0,
# expected tau/tau_0 to two decimals).
REFERENCE_LIFETIMES = (
    (1.0, 2.0, 1.31),
    (2.0, 2.0, 0.79),
    (8.0, 2.0, 0.33),
)
REFERENCE_TOL = 0.005

DEFAULT_BIN_WIDTH = 0.05
DEFAULT_T_MAX = 5.0


@dataclass
class RunConfig:
    """Resolved options for one CLI invocation."""

    command: str
    params: RateParameters | None = None
    n_pairs: int = 0
    seed: int = 0
    detector: DetectorModel = field(default_factory=DetectorModel)
    input_path: Path | None = None
    outdir: Path | None = None
    overwrite: bool = False
    bin_width: float = DEFAULT_BIN_WIDTH
    t_max: float = DEFAULT_T_MAX
    use_observed: bool = False
    as_json: bool = False
    tol: float = REFERENCE_TOL
    n_threads: int = 1
    sweep: tuple[float, float, int] | None = None  # gamma_f min, max, points
    gamma_s: float = 0.0


def _unit_params(args, n0: float = 1.0) -> RateParameters:
    g0 = args.gamma0
    if not g0 > 0:
        raise ParameterError(f"--gamma0 must be > 0, got {g0}")
    return RateParameters(
        gamma_f=args.gamma_f / g0, gamma_s=args.gamma_s / g0, n0=n0, gamma_0=1.0
    )


def _detector(args) -> DetectorModel:
    return DetectorModel(
        efficiency=args.efficiency,
        jitter_sigma=args.jitter_sigma,
        formation_profile=args.formation_profile,
        formation_width=args.formation_width,
    )


def _resolve_outdir(args) -> Path | None:
    if getattr(args, "outdir", None) is not None:
        return Path(args.outdir)
    env = os.environ.get(OUTDIR_ENV)
    return Path(env) if env else None


def _target(outdir: Path, name: str, overwrite: bool) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    if path.exists() and not overwrite:
        raise OSError(f"refusing to overwrite {path} (use --overwrite)")
    return path


def _emit(payload: dict, cfg: RunConfig, name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if cfg.outdir is not None:
        _target(cfg.outdir, name, cfg.overwrite).write_text(text + "\n")


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.outdir is None:
        print("simulate: an output directory is required (-o or PAIRDECAY_OUTDIR)",
              file=sys.stderr)
        return EXIT_USAGE
    events_path = _target(cfg.outdir, "events.csv", cfg.overwrite)
    meta_path = _target(cfg.outdir, "meta.json", cfg.overwrite)

    ev = simulate(cfg.params, cfg.n_pairs, cfg.seed, cfg.detector,
                  n_threads=cfg.n_threads)
    events_io.write_events_csv(ev, events_path)
    events_io.write_meta_json(ev, meta_path)
    print(f"n_pairs {len(ev)}")
    print(f"mean_t_f {np.mean(ev.t_f):.6g}")
    print(f"mean_dt {np.mean(ev.t_s - ev.t_f):.6g}")
    print(f"wrote {events_path} and {meta_path}")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig) -> int:
    meta = cfg.input_path.with_name("meta.json")
    ev = events_io.load_event_set(cfg.input_path, meta)

    fit_f, fit_s = estimate_rates(ev, use_observed=cfg.use_observed)
    hist = coincidence_histogram(ev, cfg.bin_width, cfg.t_max,
                                 use_observed=cfg.use_observed)
    hist_fit = fit_histogram_rate(hist)
    payload = {
        "gamma_f": fit_f.rate,
        "gamma_f_stderr": fit_f.rate_stderr,
        "gamma_s": fit_s.rate,
        "gamma_s_stderr": fit_s.rate_stderr,
        "tau_app_over_tau0": apparent_lifetime(hist),
        "histogram_rate": hist_fit.rate,
        "histogram_rate_stderr": hist_fit.rate_stderr,
        "method": fit_s.method,
        "n_used": fit_s.n_used,
        "goodness": fit_s.goodness,
        "formation_time_bias": formation_time_bias(ev),
    }
    _emit(payload, cfg, "analysis.json")

    if cfg.outdir is not None:
        events_io.write_histogram_csv(
            hist, _target(cfg.outdir, "coincidence.csv", cfg.overwrite)
        )
        grid = np.linspace(0.0, cfg.t_max, 201)
        states = empirical_populations(ev, grid)
        rows = [(s.t, s.n_e, s.n_i, s.n_i_g) for s in states]
        lines = ["t,n_e,n_i,n_i_g"]
        lines.extend(",".join(events_io.format_float(v) for v in r) for r in rows)
        _target(cfg.outdir, "populations.csv", cfg.overwrite).write_text(
            "\n".join(lines) + "\n"
        )
        p_hat = RateParameters(fit_f.rate, fit_s.rate, n0=float(len(ev)), gamma_0=1.0)
        events_io.write_population_curve_csv(
            population_curve(p_hat, grid),
            _target(cfg.outdir, "model_curve.csv", cfg.overwrite),
        )
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    solution = solve_lifetime(cfg.params)
    payload = {
        "gamma_f_over_gamma0": cfg.params.gamma_f,
        "gamma_s_over_gamma0": cfg.params.gamma_s,
        "tau_over_tau0": solution.tau,
        "residual": solution.residual,
        "branch": solution.branch,
        "iterations": solution.iterations,
        "rate_bound_satisfied": cfg.params.satisfies_rate_bound(),
    }
    _emit(payload, cfg, "lifetime.json")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    lo, hi, points = cfg.sweep
    if points < 1:
        raise ParameterError(f"--points must be >= 1, got {points}")
    if not 0 < lo <= hi:
        raise ParameterError(f"need 0 < min <= max, got [{lo}, {hi}]")
    grid = np.linspace(lo, hi, points)
    pairs = lifetime_sweep(cfg.gamma_s, grid, gamma_0=1.0)
    if cfg.outdir is not None:
        events_io.write_sweep_csv(pairs, _target(cfg.outdir, "sweep.csv", cfg.overwrite))
        print(f"wrote {cfg.outdir / 'sweep.csv'} ({points} rows)")
    else:
        print("gamma_f_over_gamma0,tau_over_tau0")
        for gf, tau in pairs:
            print(f"{events_io.format_float(gf)},{events_io.format_float(tau)}")
    return EXIT_OK


def cmd_pipeline(cfg: RunConfig) -> int:
    if cfg.input_path is not None:
        meta = cfg.input_path.with_name("meta.json")
        ev = events_io.load_event_set(cfg.input_path, meta)
    else:
        if cfg.n_pairs < 1:
            print("pipeline: provide --input or simulation parameters (--n, rates)",
                  file=sys.stderr)
            return EXIT_USAGE
        ev = simulate(cfg.params, cfg.n_pairs, cfg.seed, cfg.detector,
                      n_threads=cfg.n_threads)
    payload = pipeline_summary(
        ev, bin_width=cfg.bin_width, t_max=cfg.t_max, use_observed=cfg.use_observed
    )
    _emit(payload, cfg, "pipeline.json")
    return EXIT_OK


def cmd_paper_table(cfg: RunConfig) -> int:
    rows = []
    all_ok = True
    for gf, gs, expected in REFERENCE_LIFETIMES:
        solution = solve_lifetime(RateParameters(gf, gs, n0=1.0, gamma_0=1.0))
        ok = abs(solution.tau - expected) <= cfg.tol
        all_ok &= ok
        rows.append(
            {
                "gamma_f_over_gamma0": gf,
                "gamma_s_over_gamma0": gs,
                "tau_over_tau0": solution.tau,
                "expected": expected,
                "within_tol": ok,
            }
        )
    if cfg.as_json:
        print(json.dumps(rows, indent=2))
    else:
        print("gamma_f/gamma0  gamma_s/gamma0  tau/tau0  expected  status")
        for r in rows:
            status = "ok" if r["within_tol"] else "MISMATCH"
            print(
                f"{r['gamma_f_over_gamma0']:>14.6g}  {r['gamma_s_over_gamma0']:>14.6g}"
                f"  {r['tau_over_tau0']:>8.4f}  {r['expected']:>8.2f}  {status}"
            )
    if not all_ok:
        print(f"reference lifetimes not reproduced within tol={cfg.tol}",
              file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def _add_rate_flags(sub, *, required: bool = True):
    sub.add_argument("--gamma-f", type=float, required=required, default=1.0,
                     help="first-photon (disentanglement) rate")
    sub.add_argument("--gamma-s", type=float, required=required, default=2.0,
                     help="second-photon rate")
    sub.add_argument("--gamma0", type=float, default=1.0,
                     help="free-atom rate used as the unit (flags are divided by it)")


def _add_detector_flags(sub):
    sub.add_argument("--efficiency", type=float, default=1.0)
    sub.add_argument("--jitter-sigma", type=float, default=0.0)
    sub.add_argument("--formation-profile", default="delta",
                     choices=("delta", "gaussian", "uniform"))
    sub.add_argument("--formation-width", type=float, default=0.0,
                     help="sigma for gaussian, full width for uniform")


def _add_output_flags(sub):
    sub.add_argument("-o", "--outdir", default=None,
                     help=f"output directory (default: ${OUTDIR_ENV})")
    sub.add_argument("--overwrite", action="store_true",
                     help="replace existing output files")


def _add_histogram_flags(sub):
    sub.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    sub.add_argument("--t-max", type=float, default=DEFAULT_T_MAX)
    sub.add_argument("--use-observed", action="store_true",
                     help="analyze observed (detected, smeared) times")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairdecay",
        description="Two-stage decay of entangled atom pairs: simulate photon "
                    "pair events, fit rates, and solve for the single-atom lifetime.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="generate an event CSV + metadata")
    _add_rate_flags(sim)
    sim.add_argument("--n", type=int, required=True, help="number of pairs")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--threads", type=int, default=1)
    _add_detector_flags(sim)
    _add_output_flags(sim)

    ana = commands.add_parser("analyze", help="fit rates and spectra from an event CSV")
    ana.add_argument("--input", required=True, help="events.csv path")
    _add_histogram_flags(ana)
    _add_output_flags(ana)

    sol = commands.add_parser("solve-lifetime", help="solve the lifetime equation")
    _add_rate_flags(sol)
    _add_output_flags(sol)

    swp = commands.add_parser("sweep", help="lifetime curve over a gamma_f grid")
    swp.add_argument("--gamma-s", type=float, required=True)
    swp.add_argument("--gamma-f-min", type=float, required=True)
    swp.add_argument("--gamma-f-max", type=float, required=True)
    swp.add_argument("--points", type=int, default=50)
    swp.add_argument("--gamma0", type=float, default=1.0)
    _add_output_flags(swp)

    pipe = commands.add_parser(
        "pipeline", help="events -> rate estimates -> lifetime, in one run"
    )
    pipe.add_argument("--input", default=None, help="events.csv path")
    _add_rate_flags(pipe, required=False)
    pipe.add_argument("--n", type=int, default=0)
    pipe.add_argument("--seed", type=int, default=0)
    pipe.add_argument("--threads", type=int, default=1)
    _add_detector_flags(pipe)
    _add_histogram_flags(pipe)
    _add_output_flags(pipe)

    table = commands.add_parser(
        "paper-table", help="print the built-in reference lifetime table and verify it"
    )
    table.add_argument("--tol", type=float, default=REFERENCE_TOL)
    table.add_argument("--json", action="store_true")
    _add_output_flags(table)

    return parser


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    cfg.outdir = _resolve_outdir(args)
    cfg.overwrite = getattr(args, "overwrite", False)
    if args.command in ("simulate", "pipeline"):
        cfg.n_pairs = args.n
        cfg.seed = args.seed
        cfg.n_threads = args.threads
        cfg.detector = _detector(args)
        cfg.params = _unit_params(args, n0=float(max(args.n, 1)))
    if args.command == "solve-lifetime":
        cfg.params = _unit_params(args)
    if args.command in ("analyze", "pipeline"):
        cfg.bin_width = args.bin_width
        cfg.t_max = args.t_max
        cfg.use_observed = args.use_observed
        if getattr(args, "input", None):
            cfg.input_path = Path(args.input)
    if args.command == "sweep":
        g0 = args.gamma0
        if not g0 > 0:
            raise ParameterError(f"--gamma0 must be > 0, got {g0}")
        cfg.gamma_s = args.gamma_s / g0
        cfg.sweep = (args.gamma_f_min / g0, args.gamma_f_max / g0, args.points)
    if args.command == "paper-table":
        cfg.tol = args.tol
        cfg.as_json = args.json
    return cfg


_HANDLERS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "solve-lifetime": cmd_solve,
    "sweep": cmd_sweep,
    "pipeline": cmd_pipeline,
    "paper-table": cmd_paper_table,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return _HANDLERS[args.command](cfg)
    except ParameterError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except (FitError, SolverError) as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
