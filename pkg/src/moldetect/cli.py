"""Command-line front end: analyze, simulate, optimize, sweep.

Every subcommand reads one YAML scenario file and writes long-format CSV
(stdout or --output).  Rows carry the resolved config hash so any row
can be reproduced from its configuration alone.  --plot-dir additionally
renders figures next to the delimited output.

Exit codes: 0 success, 2 configuration or usage error, 3 exact-method
size cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from dataclasses import replace

from . import montecarlo, perf, plots
from .detector import Decision
from .errors import ConfigError, InclusionExclusionCapError, ParameterError
from .scenario import Scenario, config_hash, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3

REPORT_COLUMNS = ("config_hash",) + perf.CSV_COLUMNS
SIM_COLUMNS = ("config_hash", "truth", "trials", "successes", "rate", "std_error")

# sweepable scenario fields: name -> (attribute path, type)
_SWEEP_KEYS = {
    "m_snm": int,
    "n": int,
    "k": float,
    "eta1": float,
    "sigma_mcc": float,
    "rho": float,
    "alpha": float,
    "g": float,
    "sigma_ncc": float,
}


def _open_output(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _report_row(scenario: Scenario, m_snm: int, report) -> dict:
    row = dict(
        zip(perf.CSV_COLUMNS, perf.csv_row(scenario.config, m_snm, report))
    )
    row["config_hash"] = config_hash(scenario, m_snm=m_snm)
    return row


def _write_rows(rows, columns, path):
    stream, close = _open_output(path)
    try:
        writer = csv.DictWriter(stream, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    finally:
        if close:
            stream.close()


def _apply_sweep_value(scenario: Scenario, key: str, value):
    cfg = scenario.config
    if key == "m_snm":
        return replace(scenario, m_snm=int(value))
    if key == "rho":
        profile = (value,) if value != 0.0 else ()
        cfg = replace(cfg, rho_profile=profile, p=len(profile) + 1)
    else:
        cfg = replace(cfg, **{key: _SWEEP_KEYS[key](value)})
    return replace(scenario, config=cfg)


def _parse_vary(spec: str):
    try:
        key, rng = spec.split("=", 1)
        parts = [float(x) for x in rng.split(":")]
    except ValueError:
        raise ConfigError(f"--vary must look like key=start:step:stop, got {spec!r}")
    if key not in _SWEEP_KEYS:
        raise ConfigError(
            f"--vary key {key!r} not supported; choose from {sorted(_SWEEP_KEYS)}"
        )
    if len(parts) != 3:
        raise ConfigError(f"--vary range must have three parts, got {spec!r}")
    start, step, stop = parts
    if step <= 0.0 or start > stop:
        raise ConfigError(f"--vary range {spec!r} is empty (need start <= stop, step > 0)")
    values, v = [], start
    while v <= stop + 1e-9 * max(1.0, abs(stop)):
        values.append(_SWEEP_KEYS[key](round(v, 12)))
        v += step
    return key, values


def cmd_analyze(args) -> int:
    scenario = load_scenario(args.scenario)
    report = perf.evaluate_system(scenario.config, scenario.m_snm)
    rows = [_report_row(scenario, scenario.m_snm, report)]
    _write_rows(rows, REPORT_COLUMNS, args.output)
    if args.plot_dir:
        plots.render_rates_figure(rows, args.plot_dir)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {args.trials}")
    truth = Decision.H1 if args.truth == "h1" else Decision.H0
    plan = montecarlo.SimPlan(
        config=scenario.config,
        m_snm=scenario.m_snm,
        trials=args.trials,
        seed=args.seed,
        truth=truth,
        workers=args.workers,
    )
    result = montecarlo.run(plan)
    row = {
        "config_hash": config_hash(
            scenario, m_snm=scenario.m_snm, truth=args.truth, trials=args.trials,
            seed=args.seed,
        ),
        "truth": args.truth,
        "trials": result.trials,
        "successes": result.successes,
        "rate": result.rate,
        "std_error": result.std_error,
    }
    _write_rows([row], SIM_COLUMNS, args.output)
    half = 2.5758293035489004 * result.std_error
    print(
        f"rate = {result.rate:.6g} +- {half:.3g} (99% CI)",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_optimize(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.xi is not None or args.gamma is not None:
        if args.xi is None or args.gamma is None:
            raise ConfigError("--xi and --gamma must be given together")
        spec = perf.DesignSpec(
            config=scenario.config,
            xi=args.xi,
            gamma=args.gamma,
            vol=args.vol,
            m_max=args.m_max,
        )
    else:
        spec = scenario.design_spec()
    try:
        result = perf.optimize_concentration(spec)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [_report_row(scenario, m, report) for m, report in result.history]
    _write_rows(rows, REPORT_COLUMNS, args.output)
    if result.feasible:
        print(
            f"M*={result.m_star}, concentration={result.concentration:.6g} "
            f"sensors per {spec.vol:g} nm^3"
        )
    else:
        print(f"INFEASIBLE within m_max={spec.m_max}")
    if args.plot_dir:
        plots.render_optimization_figure(rows, spec.xi, spec.gamma, args.plot_dir)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    if not args.vary:
        raise ConfigError("sweep requires at least one --vary key=start:step:stop")
    axes = [_parse_vary(spec) for spec in args.vary]
    rows = []
    for combo in itertools.product(*(values for _, values in axes)):
        point = scenario
        for (key, _), value in zip(axes, combo):
            point = _apply_sweep_value(point, key, value)
        report = perf.evaluate_system(point.config, point.m_snm)
        rows.append(_report_row(point, point.m_snm, report))
    _write_rows(rows, REPORT_COLUMNS, args.output)
    if args.plot_dir:
        plots.render_rates_figure(rows, args.plot_dir, stem="sweep")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moldetect",
        description="Two-tier sensor-array abnormality detection: analysis, "
        "simulation, and design optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="YAML scenario file")
        p.add_argument("-o", "--output", default=None, help="CSV output path (default stdout)")

    p = sub.add_parser("analyze", help="analytic rates for the scenario as given")
    common(p)
    p.add_argument("--plot-dir", default=None, help="also render figures into this directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="empirical rates by end-to-end simulation")
    common(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", choices=("h0", "h1"), default="h1")
    p.add_argument("--workers", type=int, default=None,
                   help="thread count (default: MOLDETECT_THREADS or CPU count)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="smallest sensor count meeting the constraints")
    common(p)
    p.add_argument("--xi", type=float, default=None, help="detection floor")
    p.add_argument("--gamma", type=float, default=None, help="false-alarm ceiling")
    p.add_argument("--vol", type=float, default=1000.0, help="reference volume")
    p.add_argument("--m-max", type=int, default=64, dest="m_max")
    p.add_argument("--plot-dir", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="cartesian parameter sweep, long-format CSV")
    common(p)
    p.add_argument("--vary", action="append", default=[],
                   metavar="key=start:step:stop", help="repeatable sweep axis")
    p.add_argument("--plot-dir", default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InclusionExclusionCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
