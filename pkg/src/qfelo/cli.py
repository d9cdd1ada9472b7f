"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import yaml

from qfelo import __version__
from qfelo import classical, design, dynamics, io, quantum_stats
from qfelo.exceptions import ConfigError, NumericalError
from qfelo.params import (
    _positive,
    parse_document,
    params_from_mapping,
    run_config_from_mapping,
    serialize,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
OUT_ENV = "QFELO_OUT"

EPILOG = f"""\
exit codes:
  0  success
  1  configuration error (unreadable/invalid config, bad flags)
  2  numerical failure (quadrature, truncation, convergence, design chain)
  3  I/O failure writing outputs

The default output directory is ${OUT_ENV}, else ./qfelo_out.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="qfelo", description=__doc__.splitlines()[0],
                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"qfelo {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML/JSON configuration file")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./qfelo_out)")
    common.add_argument("--threads", default="1", help="worker processes for sweeps: integer or 'auto'")
    common.add_argument("--tag", help="file-name tag (default: UTC timestamp)")
    common.add_argument("--tolerance", type=float, help="override the quadrature relative tolerance")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "stats": "steady-state photon distribution (n, P_n)",
        "sweep": "mean/N_a and Fano factor on a (theta, p or dp) grid",
        "dynamics": "time-domain master-equation run with convergence trace",
        "classical": "quantum vs classical vs Poisson comparison",
        "design": "laboratory design chain and operating point",
        "feasibility": "(sigma_e, eps_n) constraint masks",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def _threads(value):
    if value == "auto":
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"--threads expects an integer or 'auto', got {value!r}") from None
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _quantum(doc, source, args):
    params = params_from_mapping(doc, source)
    config = run_config_from_mapping(doc, source)
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise ConfigError("--tolerance must be positive")
        config = dataclasses.replace(config, rel_tol=args.tolerance)
    return params, config


def _resolved(params, config):
    return yaml.safe_load(serialize(params, config))


def cmd_stats(doc, source, args, out, tag):
    params, config = _quantum(doc, source, args)
    stats = quantum_stats.photon_statistics(config.distribution, params, config.rel_tol, config.nmax_cap)
    files = [io.write_csv(out / f"stats_{tag}.csv", ["n", "P_n"], zip(stats.n, stats.probabilities))]
    summary = {
        "mean": stats.mean, "variance": stats.variance, "fano": stats.fano, "n_max": stats.n_max,
        "tail_mass_bound": stats.tail_mass_bound, "flags": list(stats.flags),
        "validity": params.flags(), "coupling_gT": params.coupling_gT,
    }
    files.append(io.write_json(out / f"stats_{tag}_summary.json", summary))
    print(f"mean={stats.mean:.6g} fano={stats.fano:.6g} n_max={stats.n_max}")
    return files, _resolved(params, config)


def cmd_sweep(doc, source, args, out, tag):
    doc = dict(doc)
    doc.setdefault("theta", 1.0)  # base value only; the grid supplies theta
    params, config = _quantum(doc, source, args)
    if config.sweep is None:
        raise ConfigError("missing required section", key="sweep", location=source)
    spec = config.sweep
    try:
        scenario = quantum_stats.Scenario(spec.scenario)
    except ValueError:
        raise ConfigError(f"unknown scenario {spec.scenario!r}", key="sweep.scenario", location=source) from None
    result = quantum_stats.sweep(spec.theta.values(), spec.second.values(), scenario, params,
                                 config.rel_tol, spec.hold, workers=_threads(args.threads))
    second = "p_over_q" if scenario is quantum_stats.Scenario.THETA_VS_MOMENTUM else "dp_over_q"
    header = ["axis1", "axis2", "mean_over_Na", "fano", "status"]
    files = [io.write_csv(out / f"sweep_{tag}.csv", header, result.rows())]
    files.append(io.write_json(out / f"sweep_{tag}_schema.json",
                               {"axis1": "theta", "axis2": second, "scenario": scenario.value}))
    print(f"{result.axis1.size}x{result.axis2.size} cells, "
          f"{sum(s.startswith('error') for s in result.status.ravel())} errors")
    return files, _resolved(params, config)


def cmd_dynamics(doc, source, args, out, tag):
    params, config = _quantum(doc, source, args)
    res = dynamics.run_to_steady_state(config.distribution, params, tol=config.oracle_tol,
                                       max_kicks=config.max_kicks, injection=config.injection,
                                       rel_tol=config.rel_tol)
    files = [
        io.write_csv(out / f"dynamics_{tag}.csv", ["cycle", "tv_distance", "mean", "fano"], res.trace),
        io.write_csv(out / f"dynamics_{tag}_distribution.csv", ["n", "P_n"],
                     zip(res.statistics.n, res.statistics.probabilities)),
    ]
    s = res.statistics
    print(f"converged after {res.state.injections_applied} kicks: mean={s.mean:.6g} fano={s.fano:.6g}")
    return files, _resolved(params, config)


def cmd_classical(doc, source, args, out, tag):
    params, config = _quantum(doc, source, args)
    section = doc.get("classical") or {}
    if not isinstance(section, dict):
        raise ConfigError("expected a mapping", key="classical", location=source)
    wrT = _positive(section, "recoil_wrT", source, "classical.")
    delta_cl = _positive(section, "delta_cl", source, "classical.")
    try:
        cp = classical.ClassicalParams(wrT, delta_cl, section.get("Na"))
    except ValueError as exc:
        raise ConfigError(str(exc), key="classical", location=source) from None
    q = quantum_stats.photon_statistics(config.distribution, params, config.rel_tol, config.nmax_cap)
    c = classical.classical_gaussian(q.mean, cp.recoil_wrT, cp.delta_cl)
    rows = zip(*classical.comparison_table(q, c))
    files = [io.write_csv(out / f"classical_{tag}.csv", ["n", "P_quantum", "P_classical", "P_poisson"], rows)]
    summary = {"mean": q.mean, "fano_quantum": q.fano, "fano_classical": c.fano,
               "fano_classical_formula": cp.fano, "classical_valid": cp.valid}
    files.append(io.write_json(out / f"classical_{tag}_summary.json", summary))
    print(f"mean={q.mean:.6g} fano quantum={q.fano:.6g} classical={c.fano:.6g}")
    return files, _resolved(params, config)


def _design_inputs(doc, source):
    section = doc.get("design")
    if not isinstance(section, dict):
        raise ConfigError("missing required section", key="design", location=source)
    return design.inputs_from_mapping(section, source)


def cmd_design(doc, source, args, out, tag):
    inputs = _design_inputs(doc, source)
    report = design.design(inputs)
    files = [
        io.write_csv(out / f"design_{tag}.csv",
                     ["quantity", "value_si", "unit_si", "value_display", "unit_display"],
                     design.report_rows(report)),
        io.write_csv(out / f"design_{tag}_verdicts.csv", ["name", "relation", "lhs", "rhs", "passed", "margin"],
                     (dataclasses.astuple(v) for v in report.verdicts)),
        io.write_json(out / f"design_{tag}.json", report.to_dict()),
    ]
    for name, _si, _u, value, unit in design.report_rows(report):
        print(f"{name:>28s} = {value:.6g} {unit}")
    failed = report.failed()
    print("all constraints satisfied" if not failed else f"violated: {', '.join(v.name for v in failed)}")
    return files, {"design": dataclasses.asdict(inputs)}


def cmd_feasibility(doc, source, args, out, tag):
    inputs = _design_inputs(doc, source)
    report = design.design(inputs)
    section = doc.get("feasibility") or {}
    sg, eg = design.feasibility_grids_from_mapping(section, source)
    grid = design.feasibility_scan(report, sg, eg)
    header = ["sigma_e", "eps_n", *design.CONSTRAINTS, "mask_bits", "feasible"]
    files = [io.write_csv(out / f"feasibility_{tag}.csv", header, grid.rows())]
    print(f"{int(grid.feasible.sum())} of {grid.feasible.size} cells feasible")
    return files, {"design": dataclasses.asdict(inputs),
                   "feasibility": {"sigma_e": sg.to_dict(), "eps_n": eg.to_dict()}}


COMMANDS = {
    "stats": cmd_stats,
    "sweep": cmd_sweep,
    "dynamics": cmd_dynamics,
    "classical": cmd_classical,
    "design": cmd_design,
    "feasibility": cmd_feasibility,
}


def run(args) -> int:
    try:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", location=args.config) from None
        doc = parse_document(text, args.config)
        out = Path(args.out or os.environ.get(OUT_ENV) or "qfelo_out")
        tag = args.tag or datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"qfelo: cannot create output directory {out}: {exc}", file=sys.stderr)
            return EXIT_IO
        files, resolved = COMMANDS[args.command](doc, args.config, args, out, tag)
        overrides = {k: getattr(args, k) for k in ("threads", "tolerance", "tag")}
        io.write_manifest(out, files, {"resolved": resolved, "overrides": overrides}, __version__, args.command)
    except ConfigError as exc:
        print(f"qfelo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"qfelo: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"qfelo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"qfelo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
