"""Seeded experiments: grid -> thresholds -> steady state -> transient -> path check."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .characteristics import PiecewiseThreshold
from .errors import ConfigError
from .network import NetworkGraph, attach_grounded_object, build_grid, save_graph
from .paths import concentration_report, format_path, ideal_distribution, min_threshold_path, write_concentration
from .steady import SolverControls, solve_steady, verify_kkt, write_solution
from .transient import InjectionProfile, IntegratorControls, integrate, write_frames, write_trajectory

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    rows: int = 20
    cols: int = 20
    source: tuple[int, int] | None = None
    d: float = 1.0
    delta: float = 0.7
    r: float = 800.0
    eps: float = 1e-5
    seed: int = 0
    capacitance: float = 1.0
    t_end: float = 1e9
    sample_every: int = 1
    rtol: float = 1e-8
    atol: float = 1e-10
    activity_fraction: float = 0.01
    concentration_tol: float = 0.01
    agreement_tol: float = 1e-4
    object_cells: list = field(default_factory=list)
    object_resistance: float = 1e-6
    object_capacitance: float = 1e3
    source_resistance: float | None = None
    frames: int = 4
    output_dir: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid dimensions must be positive")
        if not 0 <= self.delta < 1:
            raise ConfigError(f"delta must lie in [0, 1) so every threshold is positive, got {self.delta}")
        if self.r <= 0 or self.eps <= 0 or self.capacitance <= 0:
            raise ConfigError("r, eps and capacitance must be positive")
        if self.t_end <= 0 or self.sample_every < 1:
            raise ConfigError("t_end must be positive and sample_every at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return self

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["source"] = list(self.source) if self.source is not None else None
        doc["object_cells"] = [list(c) for c in self.object_cells]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        doc = dict(doc)
        if doc.get("source") is not None:
            doc["source"] = tuple(doc["source"])
        if "object_cells" in doc:
            doc["object_cells"] = [tuple(c) for c in doc["object_cells"]]
        return cls(**doc).validate()


def load_config(path, **overrides) -> ExperimentConfig:
    doc = json.loads(Path(path).read_text())
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(doc)


def draw_thresholds(config: ExperimentConfig, m: int) -> np.ndarray:
    """``m`` uniform draws on [0.5 - delta/2, 0.5 + delta/2] from numpy's PCG64."""
    if not 0 <= config.delta < 1:
        raise ConfigError(f"delta must lie in [0, 1), got {config.delta}")
    rng = np.random.default_rng(config.seed)
    return rng.uniform(0.5 - config.delta / 2, 0.5 + config.delta / 2, size=m)


def build_experiment_graph(config: ExperimentConfig) -> NetworkGraph:
    grid = build_grid(config.rows, config.cols, config.source, capacitance=config.capacitance)
    V = draw_thresholds(config, grid.m)
    graph = grid.with_characteristics([PiecewiseThreshold(float(v), config.eps, config.r) for v in V])
    if config.object_cells:
        cells = [graph.node_at(int(r), int(c)) for r, c in config.object_cells]
        graph = attach_grounded_object(graph, cells, config.object_resistance, config.object_capacitance)
    return graph


def profile_for(config: ExperimentConfig) -> InjectionProfile:
    return InjectionProfile(config.d, config.source_resistance)


def controls_for(config: ExperimentConfig) -> IntegratorControls:
    return IntegratorControls(
        rtol=config.rtol,
        atol=config.atol,
        sample_every=config.sample_every,
        activity_fraction=config.activity_fraction,
    )


@dataclass
class RunSummary:
    seed: int
    delta: float
    r: float
    n: int = 0
    m: int = 0
    passed: bool = False
    stage: str = "done"
    error: str | None = None
    path_links: list = field(default_factory=list)
    path_cost: float = float("nan")
    path_unique: bool = False
    steady: dict = field(default_factory=dict)
    transient: dict = field(default_factory=dict)
    agreement: float = float("nan")
    peak_activity: int = 0
    final_activity: int = 0
    final_matches_path: bool = False
    steady_detected: bool = False
    t_final: float = float("nan")
    max_lyapunov_increase: float = float("nan")
    kkt: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("artifacts")
        return doc


def run_pipeline(config: ExperimentConfig, keep_artifacts: bool = True) -> RunSummary:
    """Run one seeded experiment end to end.

    Failures are reported in the summary (``stage`` and ``error``) instead of
    being raised, so sweeps keep going.
    """
    summary = RunSummary(seed=config.seed, delta=config.delta, r=config.r)
    stage = "config"
    try:
        config.validate()
        stage = "build"
        graph = build_experiment_graph(config)
        summary.n, summary.m = graph.n, graph.m
        profile = profile_for(config)

        stage = "steady"
        sol = solve_steady(graph, profile, SolverControls())
        kkt = verify_kkt(graph, sol)
        summary.kkt = kkt.as_dict()

        stage = "transient"
        record = integrate(graph, profile, t_end=config.t_end, controls=controls_for(config), v_ref=sol.v_bar)

        stage = "path"
        path = min_threshold_path(graph)
        summary.path_links = list(path.links)
        summary.path_cost = path.cost
        summary.path_unique = path.unique

        stage = "report"
        d_eff = float(sol.dbar[0])
        conc_steady = concentration_report(sol.u_bar, path, d_eff, config.concentration_tol)
        conc_trans = concentration_report(record.currents[-1], path, d_eff, config.concentration_tol)
        summary.steady = conc_steady.as_dict()
        summary.transient = conc_trans.as_dict()
        summary.agreement = float(np.max(np.abs(record.currents[-1] - sol.u_bar)))
        summary.peak_activity = int(record.active_counts.max())
        summary.final_activity = int(record.active_counts[-1])
        summary.final_matches_path = summary.final_activity == len(path)
        summary.steady_detected = record.steady_detected
        summary.t_final = float(record.times[-1])
        summary.max_lyapunov_increase = record.max_lyapunov_increase
        summary.passed = conc_steady.passed and conc_trans.passed and summary.agreement <= config.agreement_tol

        if config.output_dir:
            stage = "export"
            out = Path(config.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            save_graph(graph, out / "graph.json")
            write_trajectory(record, out / "trajectory.csv")
            write_frames(graph, record, out / "frames", config.frames)
            (out / "path.txt").write_text(format_path(path) + "\n")
            write_concentration(conc_steady, out / "concentration.json")
            write_solution(graph, sol, out / "solution.json", kkt)
            (out / "config.json").write_text(json.dumps(config.to_dict(), indent=1, sort_keys=True) + "\n")
        if keep_artifacts:
            summary.artifacts = {
                "graph": graph,
                "solution": sol,
                "record": record,
                "path": path,
                "u_th": ideal_distribution(graph, path, d_eff).u_th,
            }
        stage = "done"
    except Exception as exc:  # noqa: BLE001 - every stage failure is reported, not raised
        log.warning("pipeline failed at stage %s: %s", stage, exc)
        summary.passed = False
        summary.error = f"{type(exc).__name__}: {exc}"
    summary.stage = stage
    if config.output_dir and Path(config.output_dir).is_dir():
        (Path(config.output_dir) / "summary.json").write_text(
            json.dumps(summary.as_dict(), indent=1, sort_keys=True) + "\n"
        )
    return summary


# -- sweeps -----------------------------------------------------------------

AXES = ("delta", "r")


@dataclass
class SweepRow:
    axis: str
    value: float
    seed: int
    peak_activity: int
    final_activity: int
    l1_distance: float
    passed: bool
    error: str | None = None
    summary: RunSummary | None = field(default=None, repr=False)


def _cell(args):
    config, keep = args
    return run_pipeline(config, keep_artifacts=keep)


def sweep(
    template: ExperimentConfig,
    axis: str,
    values,
    seeds,
    workers: int = 1,
    output_dir=None,
    keep_artifacts: bool = False,
) -> list[SweepRow]:
    """Run the pipeline for every (value, seed) cell; failures are recorded per cell."""
    values, seeds = list(values), list(seeds)
    if axis not in AXES:
        raise ConfigError(f"sweep axis must be one of {AXES}, got {axis!r}")
    if not values or not seeds:
        raise ConfigError("sweep needs at least one axis value and one seed")
    cells = []
    for value in values:
        for seed in seeds:
            cfg = replace(template, **{axis: float(value)}, seed=int(seed))
            if output_dir is not None:
                cfg.output_dir = str(Path(output_dir) / f"{axis}={float(value)!r}" / f"seed={int(seed)}")
            cells.append(cfg)
    jobs = [(c, keep_artifacts) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, jobs))
    else:
        results = [_cell(j) for j in jobs]
    rows = []
    for cfg, s in zip(cells, results):
        rows.append(
            SweepRow(
                axis=axis,
                value=float(getattr(cfg, axis)),
                seed=cfg.seed,
                peak_activity=s.peak_activity,
                final_activity=s.final_activity,
                l1_distance=float(s.steady.get("l1_distance", float("nan"))),
                passed=s.passed,
                error=s.error,
                summary=s,
            )
        )
    if output_dir is not None:
        write_sweep_table(rows, Path(output_dir) / "sweep.csv")
    return rows


def write_sweep_table(rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "seed", "peak_activity", "final_activity", "l1_distance", "passed", "error"])
        for r in rows:
            w.writerow([r.axis, repr(r.value), r.seed, r.peak_activity, r.final_activity, repr(r.l1_distance),
                        str(r.passed).lower(), r.error or ""])


def mean_by_value(rows, attr: str = "peak_activity") -> dict[float, float]:
    """Average ``attr`` over seeds for each axis value, in first-seen order."""
    groups: dict[float, list[float]] = {}
    for r in rows:
        groups.setdefault(r.value, []).append(float(getattr(r, attr)))
    return {k: float(np.mean(v)) for k, v in groups.items()}
