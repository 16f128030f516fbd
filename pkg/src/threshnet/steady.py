"""Steady state  B phi(B^T v) = d, its optimality check, and the linear oracle."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SolverError, UnsupportedEvaluationError
from .functionals import FunctionalValue, functional_J
from .network import GROUND, NetworkGraph
from .transient import InjectionProfile, IntegratorControls, TransientModel, integrate


@dataclass
class SolverControls:
    tol: float = 1e-10
    max_iter: int = 200
    regularization: float = 1e-12
    armijo: float = 1e-4
    min_step: float = 1e-12
    fallback: bool = True
    fallback_tol: float = 1e-6


@dataclass(frozen=True)
class SteadyStateSolution:
    v_bar: np.ndarray
    u_bar: np.ndarray
    kkt_residual: float
    J_value: FunctionalValue
    dbar: np.ndarray
    iterations: int = 0
    method: str = "newton"


@dataclass(frozen=True)
class KKTReport:
    stationarity: np.ndarray
    feasibility: np.ndarray
    tol: float

    @property
    def max_stationarity(self) -> float:
        return float(np.max(self.stationarity))

    @property
    def max_feasibility(self) -> float:
        return float(np.max(self.feasibility))

    @property
    def worst_link(self) -> int:
        return int(np.argmax(self.stationarity))

    @property
    def worst_node(self) -> int:
        return int(np.argmax(self.feasibility))

    @property
    def passed(self) -> bool:
        return self.max_stationarity <= self.tol and self.max_feasibility <= self.tol

    def as_dict(self) -> dict:
        return {
            "max_stationarity": self.max_stationarity,
            "worst_link": self.worst_link,
            "max_feasibility": self.max_feasibility,
            "worst_node": self.worst_node,
            "tol": self.tol,
            "passed": self.passed,
        }


def _solution(graph, model, v, iterations, method) -> SteadyStateSolution:
    u = model.resistive_currents(v)
    dbar = model.dbar.copy()
    dbar[0] -= model._gs * v[0]
    kkt = float(np.max(np.abs(graph.incidence @ u - dbar)))
    return SteadyStateSolution(v, u, kkt, functional_J(graph, u), dbar, iterations, method)


def _newton(model: TransientModel, v, controls: SolverControls):
    """Damped Newton on the KCL residual.

    The residual is the gradient of the convex co-content potential, so the
    line search runs Armijo on that potential; a plain residual decrease is also
    accepted, which keeps progress once the potential stalls at round-off.
    """
    laws = model.graph.laws
    n = len(v)

    def potential(x):
        p = np.sum(laws.cocontent(model.BT @ x)) - model.dbar @ x
        return p + 0.5 * model._gs * x[0] ** 2

    F = model.kcl_residual(v)
    norm = np.max(np.abs(F))
    for it in range(controls.max_iter):
        if norm <= controls.tol:
            return v, it, norm
        J = model.conductance_matrix(v) + controls.regularization * np.eye(n)
        try:
            dv = sla.solve(J, -F, assume_a="pos")
        except (sla.LinAlgError, ValueError):
            dv = np.linalg.lstsq(J, -F, rcond=None)[0]
        slope = F @ dv
        p0 = potential(v)
        t = 1.0
        while t >= controls.min_step:
            trial = v + t * dv
            F_trial = model.kcl_residual(trial)
            n_trial = np.max(np.abs(F_trial))
            if potential(trial) <= p0 + controls.armijo * t * slope or n_trial < norm:
                break
            t *= 0.5
        else:
            return v, it, norm
        v, F, norm = trial, F_trial, n_trial
    return v, controls.max_iter, norm


def solve_steady(
    graph: NetworkGraph,
    profile: InjectionProfile,
    controls: SolverControls | None = None,
    v0=None,
) -> SteadyStateSolution:
    """Newton solve of the steady state, with pseudo-transient continuation as fallback."""
    controls = controls or SolverControls()
    if not graph.laws.evaluable:
        raise UnsupportedEvaluationError("ideal-threshold networks are solved by the path oracle")
    model = TransientModel(graph, profile)
    v = np.zeros(graph.n) if v0 is None else np.array(v0, dtype=float)
    v, its, res = _newton(model, v, controls)
    if res <= controls.tol:
        return _solution(graph, model, v, its, "newton")
    if not controls.fallback:
        raise SolverError(f"Newton stalled after {its} iterations, residual {res:.3e}", res)
    record = integrate(
        graph,
        profile,
        t_end=1e12,
        controls=IntegratorControls(steady_tol=controls.fallback_tol, dwell=5, rtol=1e-6, atol=1e-9),
        v_ref=np.zeros(graph.n),
    )
    v, its2, res = _newton(model, record.voltages[-1], controls)
    if res <= controls.tol:
        return _solution(graph, model, v, its + its2, "pseudo-transient+newton")
    raise SolverError(f"steady solve failed after fallback, residual {res:.3e}", res)


def verify_kkt(graph: NetworkGraph, sol: SteadyStateSolution, tol: float = 1e-8) -> KKTReport:
    """Stationarity g(u) = B^T v per link and feasibility B u = d per node."""
    drops = graph.incidence.T @ sol.v_bar
    stationarity = np.abs(graph.laws.inverse(sol.u_bar) - drops)
    feasibility = np.abs(graph.incidence @ sol.u_bar - sol.dbar)
    return KKTReport(stationarity, feasibility, tol)


def solve_linear_oracle(graph: NetworkGraph, profile: InjectionProfile) -> SteadyStateSolution:
    """Direct solve of the conductance Laplacian for an all-linear network."""
    if not graph.laws.all_linear:
        raise UnsupportedEvaluationError("the linear oracle needs every link to be linear")
    B = graph.incidence
    g = np.array([1.0 / c.R for c in graph.characteristics])
    G = (B * g) @ B.T
    G[0, 0] += profile.source_conductance
    v = sla.cho_solve(sla.cho_factor(G), profile.vector(graph.n))
    u = g * (B.T @ v)
    dbar = profile.vector(graph.n)
    dbar[0] -= profile.source_conductance * v[0]
    kkt = float(np.max(np.abs(B @ u - dbar)))
    return SteadyStateSolution(v, u, kkt, functional_J(graph, u), dbar, 0, "linear-direct")


def cycle_basis(graph: NetworkGraph) -> np.ndarray:
    """Fundamental cycles of a BFS spanning tree rooted at ground, as columns.

    Every column z satisfies B z = 0 and together they span the null space of B.
    """
    n = graph.n
    parent = {n: None}
    queue = deque([n])
    tree = set()
    while queue:
        a = queue.popleft()
        for b, k in graph.adjacency[a]:
            if b not in parent:
                parent[b] = (a, k)
                tree.add(k)
                queue.append(b)

    def to_root(x):
        z = np.zeros(graph.m)
        while parent[x] is not None:
            up, k = parent[x]
            tail = n if graph.links[k].tail == GROUND else graph.links[k].tail
            z[k] += 1.0 if tail == x else -1.0
            x = up
        return z

    cols = []
    for k, link in enumerate(graph.links):
        if k in tree:
            continue
        tail = n if link.tail == GROUND else link.tail
        head = n if link.head == GROUND else link.head
        z = to_root(head) - to_root(tail)
        z[k] += 1.0
        cols.append(z)
    if not cols:
        return np.zeros((graph.m, 0))
    return np.column_stack(cols)


def random_circulation(graph: NetworkGraph, rng: np.random.Generator, norm: float = 1.0, basis=None) -> np.ndarray:
    """A random vector in the null space of B with Euclidean norm ``norm``."""
    Z = cycle_basis(graph) if basis is None else basis
    if Z.shape[1] == 0:
        return np.zeros(graph.m)
    z = Z @ rng.standard_normal(Z.shape[1])
    return norm * z / np.linalg.norm(z)


def write_solution(graph: NetworkGraph, sol: SteadyStateSolution, path, kkt: KKTReport | None = None) -> None:
    kkt = kkt or verify_kkt(graph, sol)
    doc = {
        "method": sol.method,
        "iterations": sol.iterations,
        "kkt_residual": sol.kkt_residual,
        "J": sol.J_value.value,
        "kkt": kkt.as_dict(),
        "voltages": [float(x) for x in sol.v_bar],
        "currents": [float(x) for x in sol.u_bar],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
