"""Network-level functionals of a link current vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UnsupportedEvaluationError
from .network import NetworkGraph


@dataclass(frozen=True)
class FunctionalValue:
    value: float
    contributions: np.ndarray

    def breakdown(self) -> list[tuple[int, float]]:
        return [(k, float(c)) for k, c in enumerate(self.contributions)]


def _currents(graph: NetworkGraph, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (graph.m,):
        raise DimensionError(f"current vector has shape {u.shape}, graph has {graph.m} links")
    return u


def functional_J(graph: NetworkGraph, u) -> FunctionalValue:
    """Sum over links of the convex primitive f_k(u_k)."""
    parts = graph.laws.primitive(_currents(graph, u))
    return FunctionalValue(float(np.sum(parts)), parts)


def threshold_functional(thresholds, u) -> float:
    """Sum of V_k |u_k|: the functional of the ideal threshold limit."""
    return float(np.sum(np.asarray(thresholds, dtype=float) * np.abs(np.asarray(u, dtype=float))))


def path_cost(thresholds, path_links, d: float = 1.0) -> float:
    thresholds = np.asarray(thresholds, dtype=float)
    return float(abs(d) * sum(thresholds[k] for k in path_links))


def dissipated_energy(graph: NetworkGraph, u) -> float:
    """Total dissipated power sum R_k u_k^2; linear networks only."""
    u = _currents(graph, u)
    if not graph.laws.all_linear:
        raise UnsupportedEvaluationError("dissipated energy is defined here for all-linear networks only")
    R = np.array([c.R for c in graph.characteristics])
    return float(np.sum(R * u * u))
