"""Minimum-threshold paths and the ideal-limit current distribution.

Everything here works from link thresholds alone and never calls the circuit
solvers, except :func:`convergence_study`, which compares the two.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .characteristics import PiecewiseThreshold
from .errors import ConnectivityError, DimensionError, SolverError
from .network import GROUND, NetworkGraph
from .steady import SolverControls, SteadyStateSolution, solve_steady
from .transient import InjectionProfile

TIE_TOL = 1e-12


@dataclass(frozen=True)
class PathResult:
    """Source-to-ground path. ``signs[i]`` is +1 when the path runs along
    the orientation of ``links[i]`` and -1 when it runs against it."""

    links: tuple[int, ...]
    nodes: tuple[int, ...]
    signs: tuple[int, ...]
    cost: float
    unique: bool = True

    def __len__(self):
        return len(self.links)

    def as_dict(self) -> dict:
        return {
            "nodes": ["ground" if x == GROUND else x for x in self.nodes],
            "links": list(self.links),
            "cost": self.cost,
            "unique": self.unique,
        }


@dataclass(frozen=True)
class IdealDistribution:
    u_th: np.ndarray
    support: frozenset


def _thresholds(graph: NetworkGraph, thresholds) -> np.ndarray:
    w = graph.rigidities if thresholds is None else np.asarray(thresholds, dtype=float)
    if w.shape != (graph.m,):
        raise DimensionError(f"need {graph.m} thresholds, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("thresholds must be finite and non-negative")
    return w


def _path_from(graph: NetworkGraph, link_ids, w) -> PathResult:
    """Walk ``link_ids`` from node 0 and record nodes and travel signs."""
    node, nodes, signs = 0, [0], []
    for k in link_ids:
        link = graph.links[k]
        nxt = link.other(node)
        signs.append(1 if link.tail == node else -1)
        nodes.append(nxt)
        node = nxt
    cost = 0.0
    for k in link_ids:
        cost += float(w[k])
    return PathResult(tuple(link_ids), tuple(nodes), tuple(signs), cost)


def min_threshold_path(graph: NetworkGraph, thresholds=None, tie_tol: float = TIE_TOL) -> PathResult:
    """Dijkstra from node 0 to ground over undirected links weighted by threshold.

    ``unique`` is False when some node on the returned path can be reached
    by a second route whose length is within ``tie_tol``; such a tie means a
    second minimum path exists. Ties are broken by heap order.
    """
    w = _thresholds(graph, thresholds)
    n = graph.n
    dist = [np.inf] * (n + 1)
    pred: list[tuple[int, int] | None] = [None] * (n + 1)
    tie = [False] * (n + 1)
    done = [False] * (n + 1)
    dist[0] = 0.0
    heap = [(0.0, 0)]
    while heap:
        d, a = heapq.heappop(heap)
        if done[a]:
            continue
        done[a] = True
        if a == n:
            break
        for b, k in graph.adjacency[a]:
            if done[b]:
                continue
            nd = d + w[k]
            if nd < dist[b] - tie_tol:
                dist[b], pred[b], tie[b] = nd, (a, k), False
                heapq.heappush(heap, (nd, b))
            elif nd <= dist[b] + tie_tol:
                tie[b] = True
                if nd < dist[b]:
                    dist[b], pred[b] = nd, (a, k)
                    heapq.heappush(heap, (nd, b))
    if not done[n]:
        raise ConnectivityError("ground is unreachable from the source")
    rev = []
    x = n
    unique = not tie[n]
    while x != 0:
        a, k = pred[x]
        rev.append(k)
        x = a
        unique = unique and not tie[x]
    path = _path_from(graph, rev[::-1], w)
    return PathResult(path.links, path.nodes, path.signs, path.cost, unique)


def runner_up_cost(graph: NetworkGraph, path: PathResult, thresholds=None) -> float:
    """Cost of the cheapest source-to-ground route that avoids at least one link of ``path``.

    The gap to ``path.cost`` says how close the instance is to a tie.
    """
    w = _thresholds(graph, thresholds)
    best = np.inf
    blocked = 1e6 * (w.sum() + 1.0)
    for k in path.links:
        w2 = w.copy()
        w2[k] = blocked
        try:
            alt = min_threshold_path(graph, w2)
        except ConnectivityError:
            continue
        if k not in alt.links:
            best = min(best, alt.cost)
    return float(best)


def all_simple_paths(graph: NetworkGraph, max_paths: int | None = None):
    """Yield every simple source-to-ground path as a tuple of link ids (DFS)."""
    n = graph.n
    visited = [False] * (n + 1)
    visited[0] = True
    stack = [(0, iter(graph.adjacency[0]))]
    links: list[int] = []
    count = 0
    while stack:
        a, it = stack[-1]
        step = next(it, None)
        if step is None:
            stack.pop()
            visited[a] = False
            if links:
                links.pop()
            continue
        b, k = step
        if visited[b]:
            continue
        if b == n:
            yield tuple(links + [k])
            count += 1
            if max_paths is not None and count >= max_paths:
                return
            continue
        visited[b] = True
        links.append(k)
        stack.append((b, iter(graph.adjacency[b])))


def enumerate_min_path(graph: NetworkGraph, thresholds=None) -> tuple[float, list[tuple[int, ...]]]:
    """Brute-force minimum over all simple paths; returns (cost, minimisers)."""
    w = _thresholds(graph, thresholds)
    best, winners = np.inf, []
    for p in all_simple_paths(graph):
        c = 0.0
        for k in p:
            c += float(w[k])
        if c < best - TIE_TOL:
            best, winners = c, [p]
        elif c <= best + TIE_TOL:
            winners.append(p)
    if not winners:
        raise ConnectivityError("ground is unreachable from the source")
    return best, winners


def ideal_distribution(graph: NetworkGraph, path: PathResult, d: float) -> IdealDistribution:
    """All of ``d`` along ``path``, zero elsewhere; negative ``d`` flips every sign."""
    u = np.zeros(graph.m)
    for k, s in zip(path.links, path.signs):
        u[k] += s * d
    dbar = np.zeros(graph.n)
    dbar[0] = d
    if not np.array_equal(graph.incidence @ u, dbar):
        raise ValueError("path does not carry the injection from node 0 to ground")
    support = frozenset(k for k in path.links if u[k] != 0)
    return IdealDistribution(u, support)


def lp_cross_check(graph: NetworkGraph, thresholds=None, d: float = 1.0, max_links: int = 40) -> float:
    """Optimal value of  min sum V_k |u_k|  s.t.  B u = d,  as a linear program.

    Each link is split into a forward and a backward copy, both carrying
    non-negative flow, which removes the absolute value.
    """
    w = _thresholds(graph, thresholds)
    if graph.m > max_links:
        raise ValueError(f"LP cross-check is limited to {max_links} links, graph has {graph.m}")
    B = graph.incidence
    dbar = np.zeros(graph.n)
    dbar[0] = d
    res = linprog(
        c=np.concatenate([w, w]),
        A_eq=np.hstack([B, -B]),
        b_eq=dbar,
        bounds=(0, None),
        method="highs-ds",
    )
    if res.status == 2:
        raise ConnectivityError("flow problem is infeasible")
    if res.status != 0:
        raise SolverError(f"LP failed: {res.message}")
    return float(res.fun)


@dataclass(frozen=True)
class ConcentrationReport:
    max_off_path: float
    max_on_path_deviation: float
    l1_distance: float
    tol: float
    d: float

    @property
    def passed(self) -> bool:
        limit = self.tol * abs(self.d)
        return self.max_off_path <= limit and self.max_on_path_deviation <= limit

    def as_dict(self) -> dict:
        return {
            "max_off_path": self.max_off_path,
            "max_on_path_deviation": self.max_on_path_deviation,
            "l1_distance": self.l1_distance,
            "tol": self.tol,
            "d": self.d,
            "passed": self.passed,
        }


def concentration_report(u, path: PathResult, d: float, tol: float = 0.01) -> ConcentrationReport:
    """How far ``u`` is from carrying all of ``d`` along ``path`` and nothing else."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = np.asarray(u, dtype=float)
    target = np.zeros_like(u)
    for k, s in zip(path.links, path.signs):
        target[k] += s * d
    on = np.zeros(u.shape, dtype=bool)
    on[list(path.links)] = True
    off = np.abs(u[~on])
    return ConcentrationReport(
        max_off_path=float(off.max()) if off.size else 0.0,
        max_on_path_deviation=float(np.max(np.abs(u[on] - target[on]))),
        l1_distance=float(np.sum(np.abs(u - target))),
        tol=tol,
        d=d,
    )


@dataclass
class ConvergenceStudy:
    r_values: list[float]
    distances: list[float]
    path: PathResult
    solutions: list[SteadyStateSolution] = field(repr=False, default_factory=list)

    @property
    def final_is_min(self) -> bool:
        return self.distances[-1] <= min(self.distances)

    def as_dict(self) -> dict:
        return {"r": list(self.r_values), "l1_distance": list(self.distances), "final_is_min": self.final_is_min}


def threshold_network(graph: NetworkGraph, thresholds, r: float, eps: float) -> NetworkGraph:
    """Replace every positive-threshold link by a piecewise-linear law with plasma conductivity ``r``."""
    chars = [
        PiecewiseThreshold(float(v), eps, r) if v > 0 else c
        for v, c in zip(np.asarray(thresholds, dtype=float), graph.characteristics)
    ]
    return graph.with_characteristics(chars)


def convergence_study(graph: NetworkGraph, thresholds, d: float, r_ladder, eps: float = 1e-5) -> ConvergenceStudy:
    """L1 distance between the steady state at each plasma conductivity and the ideal path flow."""
    ladder = [float(r) for r in r_ladder]
    if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("r_ladder must be a non-empty increasing sequence")
    w = _thresholds(graph, thresholds)
    path = min_threshold_path(graph, w)
    u_th = ideal_distribution(graph, path, d).u_th
    distances, solutions = [], []
    for r in ladder:
        try:
            sol = solve_steady(threshold_network(graph, w, r, eps), InjectionProfile(d), SolverControls())
        except SolverError as exc:
            raise SolverError(f"rung r={r:g}: {exc}", exc.residual) from exc
        solutions.append(sol)
        distances.append(float(np.sum(np.abs(sol.u_bar - u_th))))
    return ConvergenceStudy(ladder, distances, path, solutions)


def format_path(path: PathResult) -> str:
    nodes = ",".join("ground" if x == GROUND else str(x) for x in path.nodes)
    links = ",".join(str(k) for k in path.links)
    return f"nodes={nodes} links={links} cost={path.cost!r} unique={str(path.unique).lower()}"


def write_paths(paths, path_file) -> None:
    with open(path_file, "w") as fh:
        for p in paths:
            fh.write(format_path(p) + "\n")


def write_concentration(report: ConcentrationReport, path_file) -> None:
    with open(path_file, "w") as fh:
        json.dump(report.as_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
