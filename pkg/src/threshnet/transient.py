"""Transient RC dynamics  B C B^T v' = -B phi(B^T v) + d.

The capacitance Laplacian ``B C B^T`` is factorised once per model and the
system is handed to a stiff scipy stepper (BDF by default) that we drive one
accepted step at a time, so samples, steady-state detection and diagnostics
stay under our control.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.integrate import BDF, Radau

from .errors import DimensionError, RankError, SolverError, StiffnessError, UnsupportedEvaluationError
from .network import GROUND, NetworkGraph

_STEPPERS = {"BDF": BDF, "Radau": Radau}


@dataclass(frozen=True)
class InjectionProfile:
    """Constant current ``d`` injected at node 0.

    With ``source_resistance`` set, the generator is a voltage source of
    open-circuit voltage ``d * source_resistance`` behind that resistance
    (its Norton equivalent), so the injected current becomes ``d - v0 / Rs``.
    """

    d: float = 1.0
    source_resistance: float | None = None
    target_node: int = 0

    def __post_init__(self):
        if self.target_node != 0:
            raise ValueError("current is always injected at node 0")
        if self.source_resistance is not None and self.source_resistance <= 0:
            raise ValueError("source_resistance must be positive")

    def vector(self, n: int) -> np.ndarray:
        dbar = np.zeros(n)
        dbar[0] = self.d
        return dbar

    def injected(self, v) -> float:
        if self.source_resistance is None:
            return float(self.d)
        return float(self.d - v[0] / self.source_resistance)

    @property
    def source_conductance(self) -> float:
        return 0.0 if self.source_resistance is None else 1.0 / self.source_resistance


@dataclass
class IntegratorControls:
    method: str = "BDF"
    rtol: float = 1e-8
    atol: float = 1e-10
    first_step: float | None = None
    max_steps: int = 200_000
    sample_every: int = 1
    steady_tol: float = 1e-8
    dwell: int = 10
    activity_fraction: float = 0.01


@dataclass(frozen=True)
class TransientState:
    t: float
    v: np.ndarray
    u: np.ndarray


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    voltages: np.ndarray
    currents: np.ndarray
    resistive_currents: np.ndarray
    lyapunov: np.ndarray
    active_counts: np.ndarray
    activity_threshold: float
    steady_detected: bool
    steps: int
    v_ref: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> TransientState:
        return TransientState(float(self.times[-1]), self.voltages[-1], self.currents[-1])

    @property
    def max_lyapunov_increase(self) -> float:
        if len(self.lyapunov) < 2:
            return 0.0
        return float(np.max(np.diff(self.lyapunov)))


class TransientModel:
    """Per-run state: incidence, capacitances and the Cholesky factor of B C B^T."""

    def __init__(self, graph: NetworkGraph, profile: InjectionProfile):
        if not graph.laws.evaluable:
            raise UnsupportedEvaluationError("ideal threshold links cannot be simulated")
        self.graph = graph
        self.profile = profile
        self.B = graph.incidence_sparse
        self.BT = self.B.T.tocsr()
        self.C = graph.capacitances
        self.laplacian = (graph.incidence * self.C) @ graph.incidence.T
        try:
            self._factor = sla.cho_factor(self.laplacian)
        except sla.LinAlgError as exc:
            raise RankError("B C B^T is singular; the graph is not properly grounded") from exc
        self.dbar = profile.vector(graph.n)
        self._gs = profile.source_conductance

    def drops(self, v) -> np.ndarray:
        return self.BT @ v

    def resistive_currents(self, v) -> np.ndarray:
        return self.graph.laws.forward(self.BT @ v)

    def kcl_residual(self, v) -> np.ndarray:
        """B phi(B^T v) - d (plus source-resistance loading)."""
        r = self.B @ self.resistive_currents(v) - self.dbar
        if self._gs:
            r[0] += self._gs * v[0]
        return r

    def rhs(self, t, v) -> np.ndarray:
        return -sla.cho_solve(self._factor, self.kcl_residual(v))

    def conductance_matrix(self, v) -> np.ndarray:
        """Jacobian of the KCL residual: B diag(phi'(B^T v)) B^T."""
        B = self.graph.incidence
        G = (B * self.graph.laws.derivative(self.BT @ v)) @ B.T
        if self._gs:
            G[0, 0] += self._gs
        return G

    def jacobian(self, t, v) -> np.ndarray:
        return -sla.cho_solve(self._factor, self.conductance_matrix(v))

    def currents(self, v, vdot=None) -> np.ndarray:
        """Total link currents: resistive part plus C_k d/dt of the drop."""
        if vdot is None:
            vdot = self.rhs(0.0, v)
        return self.resistive_currents(v) + self.C * (self.BT @ vdot)

    def lyapunov(self, v, v_ref) -> float:
        x = np.asarray(v, dtype=float) - np.asarray(v_ref, dtype=float)
        return float(0.5 * x @ self.laplacian @ x)


def assemble_rhs(graph: NetworkGraph, v, profile: InjectionProfile) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (graph.n,):
        raise DimensionError(f"voltage vector has shape {v.shape}, graph has {graph.n} nodes")
    return TransientModel(graph, profile).rhs(0.0, v)


def lyapunov_energy(graph: NetworkGraph, v, v_ref) -> float:
    """Energy stored in the capacitors, 1/2 x^T B C B^T x with x = v - v_ref."""
    x = np.asarray(v, dtype=float) - np.asarray(v_ref, dtype=float)
    if x.shape != (graph.n,):
        raise DimensionError(f"voltage vectors must have length {graph.n}")
    B = graph.incidence
    y = B.T @ x
    return float(0.5 * np.sum(graph.capacitances * y * y))


def _activity_threshold(profile: InjectionProfile, fraction: float) -> float:
    return fraction * abs(profile.d) if profile.d != 0 else fraction


def integrate(
    graph: NetworkGraph,
    profile: InjectionProfile,
    v0=None,
    t_end: float = 1e9,
    controls: IntegratorControls | None = None,
    v_ref=None,
) -> TrajectoryRecord:
    """Integrate from ``v0`` (default: uncharged network) until ``t_end`` or steady state.

    Steady state is declared once ``controls.dwell`` consecutive accepted steps
    have ``max|v'| < controls.steady_tol``. ``v_ref`` is the equilibrium used for
    the Lyapunov monitor; when omitted it is computed with the steady solver.
    """
    controls = controls or IntegratorControls()
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if controls.method not in _STEPPERS:
        raise ValueError(f"unknown integration method {controls.method!r}")
    model = TransientModel(graph, profile)
    v0 = np.zeros(graph.n) if v0 is None else np.array(v0, dtype=float)
    if v0.shape != (graph.n,) or not np.all(np.isfinite(v0)):
        raise DimensionError("v0 must be a finite vector with one entry per node")

    stepper = _STEPPERS[controls.method](
        model.rhs,
        0.0,
        v0,
        t_end,
        rtol=controls.rtol,
        atol=controls.atol,
        jac=model.jacobian,
        first_step=controls.first_step,
    )
    times, volts, vdots = [0.0], [v0.copy()], [model.rhs(0.0, v0)]
    dwell = 1 if np.max(np.abs(vdots[0])) < controls.steady_tol else 0
    steps = 0
    steady = False
    while stepper.status == "running" and steps < controls.max_steps:
        message = stepper.step()
        if stepper.status == "failed":
            raise StiffnessError(
                f"integrator failed at t={stepper.t:.6g}: {message}",
                state={"t": stepper.t, "step_size": stepper.step_size, "v": stepper.y.copy()},
            )
        steps += 1
        y = stepper.y
        if not np.all(np.isfinite(y)):
            raise StiffnessError(f"non-finite voltages at t={stepper.t:.6g}", state={"t": stepper.t})
        vdot = model.rhs(stepper.t, y)
        dwell = dwell + 1 if np.max(np.abs(vdot)) < controls.steady_tol else 0
        steady = dwell >= controls.dwell
        last = steady or stepper.status != "running" or steps >= controls.max_steps
        if steps % controls.sample_every == 0 or last:
            times.append(stepper.t)
            volts.append(y.copy())
            vdots.append(vdot)
        if steady:
            break

    V = np.array(volts)
    Vdot = np.array(vdots)
    phi = np.array([model.resistive_currents(v) for v in V])
    U = phi + model.C * (Vdot @ graph.incidence)
    if v_ref is None:
        v_ref = _equilibrium(graph, profile, V[-1])
    X = V - v_ref
    lyap = 0.5 * np.einsum("ij,jk,ik->i", X, model.laplacian, X)
    threshold = _activity_threshold(profile, controls.activity_fraction)
    return TrajectoryRecord(
        times=np.array(times),
        voltages=V,
        currents=U,
        resistive_currents=phi,
        lyapunov=lyap,
        active_counts=np.sum(np.abs(U) > threshold, axis=1),
        activity_threshold=threshold,
        steady_detected=steady,
        steps=steps,
        v_ref=np.asarray(v_ref, dtype=float),
    )


def _equilibrium(graph, profile, fallback):
    from .steady import SolverControls, solve_steady

    try:
        return solve_steady(graph, profile, SolverControls(fallback=False), v0=fallback).v_bar
    except SolverError:
        return fallback


def branch_activity(record: TrajectoryRecord, activity_threshold: float, resistive: bool = False) -> np.ndarray:
    """Number of links with |u_k| above the threshold at each sample.

    ``resistive=True`` counts only the conductive (non-capacitive) part.
    """
    if activity_threshold <= 0:
        raise ValueError("activity_threshold must be positive")
    U = record.resistive_currents if resistive else record.currents
    return np.sum(np.abs(U) > activity_threshold, axis=1)


# -- export -----------------------------------------------------------------


def write_trajectory(record: TrajectoryRecord, path) -> None:
    """One CSV row per sample: time, Lyapunov value, active count, link currents."""
    m = record.currents.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "lyapunov", "active"] + [f"u{k}" for k in range(m)])
        for t, ly, a, u in zip(record.times, record.lyapunov, record.active_counts, record.currents):
            w.writerow([repr(float(t)), repr(float(ly)), int(a)] + [repr(float(x)) for x in u])


def frame_indices(record: TrajectoryRecord, count: int = 4) -> list[int]:
    """Evenly spaced sample indices from the first sample to the last."""
    last = len(record) - 1
    return sorted({int(round(x)) for x in np.linspace(0, last, count)})


def _endpoint_coords(graph: NetworkGraph, node: int, partner: int):
    if graph.coords is None:
        return ("", "")
    if node == GROUND:
        rows = graph.grid_shape[0] if graph.grid_shape else max(r for r, _ in graph.coords) + 1
        return (rows, graph.coords[partner][1])
    return graph.coords[node]


def write_frame(graph: NetworkGraph, record: TrajectoryRecord, index: int, path) -> None:
    u = record.currents[index]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link", "tail", "head", "tail_row", "tail_col", "head_row", "head_col", "abs_current"])
        for k, link in enumerate(graph.links):
            tr, tc = _endpoint_coords(graph, link.tail, link.head)
            hr, hc = _endpoint_coords(graph, link.head, link.tail)
            tail = "ground" if link.tail == GROUND else link.tail
            head = "ground" if link.head == GROUND else link.head
            w.writerow([k, tail, head, tr, tc, hr, hc, repr(float(abs(u[k])))])


def write_frames(graph: NetworkGraph, record: TrajectoryRecord, directory, count: int = 4) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, idx in enumerate(frame_indices(record, count)):
        p = directory / f"frame_{i}.csv"
        write_frame(graph, record, idx, p)
        paths.append(p)
    return paths
