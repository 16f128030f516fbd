"""Command line entry point: ``threshnet simulate|sweep|path|steady|validate``.

Every verb exits with status 0 only when all of its verdicts pass.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .errors import ThreshnetError
from .experiment import (
    AXES,
    ExperimentConfig,
    build_experiment_graph,
    mean_by_value,
    profile_for,
    run_pipeline,
    sweep,
)
from .network import load_graph, save_graph
from .paths import format_path, lp_cross_check, min_threshold_path
from .steady import solve_steady, verify_kkt, write_solution
from .transient import InjectionProfile

LP_TOL = 1e-10

# Flag name, type, help. Each flag overrides the matching ExperimentConfig field.
CONFIG_FLAGS = [
    ("rows", int, "grid rows"),
    ("cols", int, "grid columns"),
    ("d", float, "injected current"),
    ("delta", float, "threshold spread; thresholds are uniform on [0.5-delta/2, 0.5+delta/2]"),
    ("r", float, "plasma conductivity of broken-down links"),
    ("eps", float, "insulator conductivity below threshold"),
    ("seed", int, "threshold RNG seed"),
    ("capacitance", float, "capacitance of every grid link"),
    ("t_end", float, "transient end time"),
    ("sample_every", int, "keep every k-th integrator step"),
    ("rtol", float, "integrator relative tolerance"),
    ("atol", float, "integrator absolute tolerance"),
    ("activity_fraction", float, "a link is active when |u| exceeds this fraction of d"),
    ("concentration_tol", float, "allowed off-path current as a fraction of d"),
    ("agreement_tol", float, "allowed gap between transient end state and steady state"),
    ("object_resistance", float, "resistance of grounded-object links"),
    ("object_capacitance", float, "capacitance of grounded-object links"),
    ("source_resistance", float, "drive through this series resistance instead of an ideal current source"),
    ("frames", int, "number of current snapshots to export"),
    ("output_dir", str, "directory for exported artifacts"),
]


def _cell(text: str) -> tuple[int, int]:
    try:
        r, c = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}") from None
    return r, c


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with experiment fields; flags override it")
    for name, typ, text in CONFIG_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None, help=text)
    p.add_argument("--source", type=_cell, default=None, metavar="ROW,COL", help="source cell (default: top middle)")
    p.add_argument(
        "--object-cell",
        dest="object_cells",
        type=_cell,
        action="append",
        default=None,
        metavar="ROW,COL",
        help="cell of a grounded conductive object; repeat for each cell",
    )


def config_from_args(args) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names and v is not None}
    doc = json.loads(args.config.read_text()) if args.config else {}
    doc.update(overrides)
    if "source" in doc and doc["source"] is not None:
        doc["source"] = list(doc["source"])
    return ExperimentConfig.from_dict(doc)


def _graph_and_profile(args, config):
    if args.graph:
        return load_graph(args.graph), InjectionProfile(config.d, config.source_resistance)
    return build_experiment_graph(config), profile_for(config)


def _emit(doc, as_json: bool, text: str) -> None:
    print(json.dumps(doc, indent=1, sort_keys=True) if as_json else text)


# -- verbs ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = config_from_args(args)
    s = run_pipeline(config, keep_artifacts=False)
    if args.json:
        _emit(s.as_dict(), True, "")
    elif s.error:
        print(f"FAIL at stage {s.stage}: {s.error}")
    else:
        print(f"grid {config.rows}x{config.cols}, {s.m} links, seed {s.seed}, delta {s.delta}, r {s.r}")
        print(f"path: {len(s.path_links)} links, cost {s.path_cost:.6g}, unique {s.path_unique}")
        for label, rep in (("steady", s.steady), ("transient", s.transient)):
            print(
                f"{label}: max off-path {rep['max_off_path']:.3e}, "
                f"max on-path deviation {rep['max_on_path_deviation']:.3e}, L1 {rep['l1_distance']:.3e}"
            )
        print(f"transient vs steady: {s.agreement:.3e}; steady detected {s.steady_detected} at t={s.t_final:.3g}")
        print(f"activity: peak {s.peak_activity}, final {s.final_activity}")
        print("PASS" if s.passed else "FAIL")
    return 0 if s.passed else 1


def cmd_sweep(args) -> int:
    template = config_from_args(args)
    out = args.output_dir
    template.output_dir = None
    rows = sweep(template, args.axis, args.values, args.seeds, workers=args.workers, output_dir=out)
    if args.json:
        _emit([{k: v for k, v in vars(r).items() if k != "summary"} for r in rows], True, "")
    else:
        for r in rows:
            status = "PASS" if r.passed else "FAIL"
            extra = f" ({r.error})" if r.error else ""
            print(
                f"{args.axis}={r.value:g} seed={r.seed}: peak {r.peak_activity}, "
                f"final {r.final_activity}, L1 {r.l1_distance:.3e} {status}{extra}"
            )
        for value, mean in mean_by_value(rows).items():
            print(f"mean peak activity at {args.axis}={value:g}: {mean:.2f}")
    return 0 if all(r.passed for r in rows) else 1


def cmd_path(args) -> int:
    config = config_from_args(args)
    graph, _ = _graph_and_profile(args, config)
    path = min_threshold_path(graph)
    ok = True
    doc = path.as_dict()
    if args.lp_check:
        lp = lp_cross_check(graph, d=1.0)
        gap = abs(lp - path.cost)
        ok = gap <= LP_TOL
        doc["lp_cost"], doc["lp_gap"] = lp, gap
    if args.output:
        save_path = Path(args.output)
        save_path.write_text(format_path(path) + "\n")
    if args.json:
        _emit(doc, True, "")
    else:
        print(format_path(path))
        if args.lp_check:
            print(f"LP cost {doc['lp_cost']!r}, gap {doc['lp_gap']:.3e} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_steady(args) -> int:
    config = config_from_args(args)
    graph, profile = _graph_and_profile(args, config)
    sol = solve_steady(graph, profile)
    kkt = verify_kkt(graph, sol, tol=args.kkt_tol)
    if args.output:
        write_solution(graph, sol, args.output, kkt)
    if args.save_graph:
        save_graph(graph, args.save_graph)
    doc = {"method": sol.method, "iterations": sol.iterations, "J": sol.J_value.value, "kkt": kkt.as_dict()}
    _emit(
        doc,
        args.json,
        f"{sol.method} in {sol.iterations} iterations, J={sol.J_value.value:.10g}, "
        f"stationarity {kkt.max_stationarity:.3e} (link {kkt.worst_link}), "
        f"feasibility {kkt.max_feasibility:.3e} (node {kkt.worst_node}) {'PASS' if kkt.passed else 'FAIL'}",
    )
    return 0 if kkt.passed else 1


def cmd_validate(args) -> int:
    from .validation import AcceptanceSuite

    if args.quick:
        suite = AcceptanceSuite(
            concentration_seeds=range(4),
            linear_seeds=range(3),
            lp_instances=20,
            sweep_seeds=range(2),
            fd_points=20,
        )
    else:
        suite = AcceptanceSuite()
    results = suite.run_all(args.criteria)
    if args.json:
        _emit([{"criterion": r.number, "name": r.name, "passed": r.passed, "detail": r.detail} for r in results], True, "")
    else:
        for r in results:
            print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threshnet", description="Threshold-network breakdown simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one seeded experiment end to end")
    _add_config_flags(p)
    p.add_argument("--json", action="store_true", help="print the run summary as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run the experiment over a parameter axis and several seeds")
    _add_config_flags(p)
    p.add_argument("--axis", choices=AXES, default="delta")
    p.add_argument("--values", type=float, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("path", help="minimum-threshold path only")
    _add_config_flags(p)
    p.add_argument("--graph", type=Path, help="graph JSON file instead of a generated grid")
    p.add_argument("--lp-check", action="store_true", help="cross-check the path cost with a linear program")
    p.add_argument("--output", type=Path, help="write the path line to this file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("steady", help="steady-state solve and optimality check only")
    _add_config_flags(p)
    p.add_argument("--graph", type=Path, help="graph JSON file instead of a generated grid")
    p.add_argument("--kkt-tol", type=float, default=1e-8)
    p.add_argument("--output", type=Path, help="write voltages, currents and the optimality report as JSON")
    p.add_argument("--save-graph", type=Path, help="also write the solved graph as JSON")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--criteria", type=int, nargs="+", choices=range(1, 8), help="subset of checks to run")
    p.add_argument("--quick", action="store_true", help="fewer seeds and instances")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ThreshnetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
