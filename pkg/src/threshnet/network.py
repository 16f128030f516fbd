"""Network graphs: grids, explicit link lists, incidence matrices, graph files.

Internal nodes are numbered ``0 .. n-1`` with node 0 the injection point.
All grounded terminals are collapsed into a single sentinel, :data:`GROUND`,
which has no row in the incidence matrix.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .characteristics import Characteristic, Linear, LinkLaws, format_characteristic, parse_characteristic
from .errors import ConnectivityError, DimensionError, TopologyError

GROUND = -1
FILE_FORMAT = "threshnet-graph/1"


@dataclass(frozen=True)
class Link:
    tail: int
    head: int

    def touches_ground(self) -> bool:
        return self.tail == GROUND or self.head == GROUND

    def other(self, node: int) -> int:
        if node == self.tail:
            return self.head
        if node == self.head:
            return self.tail
        raise ValueError(f"node {node} is not an endpoint of {self}")


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Immutable network. Capacitances are stored as a read-only array."""

    n: int
    links: tuple[Link, ...]
    capacitances: np.ndarray
    characteristics: tuple[Characteristic, ...]
    coords: tuple[tuple[int, int], ...] | None = None
    grid_shape: tuple[int, int] | None = field(default=None)

    def __post_init__(self):
        links = tuple(l if isinstance(l, Link) else Link(*l) for l in self.links)
        caps = np.array(self.capacitances, dtype=float).reshape(-1)
        caps.setflags(write=False)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "capacitances", caps)
        object.__setattr__(self, "characteristics", tuple(self.characteristics))
        if self.coords is not None:
            object.__setattr__(self, "coords", tuple(tuple(int(x) for x in c) for c in self.coords))
        self._validate()

    def _validate(self):
        n, m = self.n, len(self.links)
        if n < 1 or m < 1:
            raise DimensionError(f"need at least one node and one link (n={n}, m={m})")
        if len(self.capacitances) != m or len(self.characteristics) != m:
            raise DimensionError("capacitances and characteristics must have one entry per link")
        if self.coords is not None and len(self.coords) != n:
            raise DimensionError("coords must have one entry per node")
        for k, link in enumerate(self.links):
            for end in (link.tail, link.head):
                if end != GROUND and not 0 <= end < n:
                    raise TopologyError(f"link {k} endpoint {end} out of range")
            if link.tail == link.head:
                raise TopologyError(f"link {k} is a self-loop")
        if not np.all(self.capacitances > 0):
            raise TopologyError("capacitances must be positive")
        for c in self.characteristics:
            if not isinstance(c, Characteristic):
                raise TypeError(f"not a characteristic: {c!r}")
        reached = self._reachable_from_ground()
        if not all(reached):
            missing = [i for i, ok in enumerate(reached) if not ok]
            raise ConnectivityError(f"nodes {missing[:10]} cannot reach ground")

    def _reachable_from_ground(self):
        seen = [False] * (self.n + 1)
        seen[self.n] = True
        queue = deque([self.n])
        adj = self.adjacency
        while queue:
            a = queue.popleft()
            for b, _ in adj[a]:
                if not seen[b]:
                    seen[b] = True
                    queue.append(b)
        return seen[: self.n]

    @property
    def m(self) -> int:
        return len(self.links)

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Undirected adjacency, ground at index ``n``. Entries are ``(neighbour, link id)``."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n + 1)]
        for k, link in enumerate(self.links):
            a = self.n if link.tail == GROUND else link.tail
            b = self.n if link.head == GROUND else link.head
            adj[a].append((b, k))
            adj[b].append((a, k))
        return adj

    @cached_property
    def incidence(self) -> np.ndarray:
        B = np.zeros((self.n, self.m))
        for k, link in enumerate(self.links):
            if link.tail != GROUND:
                B[link.tail, k] = 1.0
            if link.head != GROUND:
                B[link.head, k] = -1.0
        B.setflags(write=False)
        return B

    @cached_property
    def incidence_sparse(self) -> sp.csr_array:
        return sp.csr_array(self.incidence)

    @cached_property
    def laws(self) -> LinkLaws:
        return LinkLaws(self.characteristics)

    @property
    def rigidities(self) -> np.ndarray:
        return np.array([c.rigidity for c in self.characteristics])

    def with_characteristics(self, chars) -> "NetworkGraph":
        chars = tuple(chars)
        if len(chars) != self.m:
            raise DimensionError(f"expected {self.m} characteristics, got {len(chars)}")
        return replace(self, characteristics=chars)

    def with_capacitances(self, caps) -> "NetworkGraph":
        return replace(self, capacitances=np.broadcast_to(np.asarray(caps, dtype=float), (self.m,)))

    def node_at(self, row: int, col: int) -> int:
        if self.coords is None:
            raise TopologyError("graph has no grid coordinates")
        try:
            return self.coords.index((row, col))
        except ValueError:
            raise TopologyError(f"no node at ({row}, {col})") from None

    def __eq__(self, other):
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.links == other.links
            and self.characteristics == other.characteristics
            and np.array_equal(self.capacitances, other.capacitances)
            and self.coords == other.coords
            and self.grid_shape == other.grid_shape
        )

    __hash__ = None


def build_incidence(graph: NetworkGraph) -> np.ndarray:
    return graph.incidence


def build_grid(
    rows: int,
    cols: int,
    source: tuple[int, int] | None = None,
    characteristic: Characteristic | None = None,
    capacitance: float = 1.0,
) -> NetworkGraph:
    """Square 4-neighbour lattice; every bottom-row node also links to ground.

    Nodes are numbered in breadth-first order from ``source`` (default: the
    top-row centre) and every link is oriented away from the source.
    """
    if int(rows) < 1 or int(cols) < 1:
        raise DimensionError(f"grid dimensions must be positive, got {rows}x{cols}")
    rows, cols = int(rows), int(cols)
    if source is None:
        source = (0, cols // 2)
    sr, sc = source
    if not (0 <= sr < rows and 0 <= sc < cols):
        raise TopologyError(f"source {source} outside {rows}x{cols} grid")

    ids: dict[tuple[int, int], int] = {(sr, sc): 0}
    order = [(sr, sc)]
    queue = deque([(sr, sc)])
    while queue:
        r, c = queue.popleft()
        for nr, nc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
            if 0 <= nr < rows and 0 <= nc < cols and (nr, nc) not in ids:
                ids[(nr, nc)] = len(order)
                order.append((nr, nc))
                queue.append((nr, nc))

    pairs = []
    for r in range(rows):
        for c in range(cols):
            here = ids[(r, c)]
            for nr, nc in ((r, c + 1), (r + 1, c)):
                if nr < rows and nc < cols:
                    there = ids[(nr, nc)]
                    pairs.append((min(here, there), max(here, there)))
            if r == rows - 1:
                pairs.append((here, GROUND))
    # BFS ids grow with distance from the source, so (low, high) points away from it.
    pairs.sort(key=lambda p: (p[0], rows * cols if p[1] == GROUND else p[1]))
    links = tuple(Link(a, b) for a, b in pairs)
    char = characteristic if characteristic is not None else Linear(1.0)
    return NetworkGraph(
        n=rows * cols,
        links=links,
        capacitances=np.full(len(links), float(capacitance)),
        characteristics=(char,) * len(links),
        coords=tuple(order),
        grid_shape=(rows, cols),
    )


def attach_grounded_object(
    graph: NetworkGraph,
    object_nodes,
    conduct_resistance: float,
    object_capacitance: float,
) -> NetworkGraph:
    """Model a grounded conductor occupying ``object_nodes``.

    Consecutive object nodes get a linear low-resistance, high-capacitance
    link (replacing an existing link between them if there is one) and the
    last object node gets a new link of the same kind to ground.
    """
    nodes = [int(x) for x in object_nodes]
    if not nodes:
        return graph
    if conduct_resistance <= 0 or object_capacitance <= 0:
        raise ValueError("object resistance and capacitance must be positive")
    for x in nodes:
        if not 0 <= x < graph.n:
            raise TopologyError(f"object node {x} is not an internal node")
    law = Linear(float(conduct_resistance))
    links = list(graph.links)
    chars = list(graph.characteristics)
    caps = list(graph.capacitances)
    for a, b in zip(nodes, nodes[1:]):
        existing = next((k for k, l in enumerate(links) if {l.tail, l.head} == {a, b}), None)
        if existing is None:
            links.append(Link(a, b))
            chars.append(law)
            caps.append(float(object_capacitance))
        else:
            chars[existing] = law
            caps[existing] = float(object_capacitance)
    links.append(Link(nodes[-1], GROUND))
    chars.append(law)
    caps.append(float(object_capacitance))
    return replace(graph, links=tuple(links), characteristics=tuple(chars), capacitances=np.array(caps))


# -- graph files ------------------------------------------------------------


def _end_to_json(x):
    return "ground" if x == GROUND else x


def _end_from_json(x):
    if x == "ground":
        return GROUND
    if isinstance(x, bool) or not isinstance(x, int):
        raise TopologyError(f"bad link endpoint {x!r}")
    return x


def graph_to_dict(graph: NetworkGraph) -> dict:
    """Explicit form: characteristics are deduplicated into an id table."""
    table: dict[str, str] = {}
    ids: dict[str, str] = {}
    rows = []
    for link, cap, char in zip(graph.links, graph.capacitances, graph.characteristics):
        text = format_characteristic(char)
        if text not in ids:
            ids[text] = f"c{len(ids)}"
            table[ids[text]] = text
        rows.append([_end_to_json(link.tail), _end_to_json(link.head), float(cap), ids[text]])
    doc = {"format": FILE_FORMAT, "nodes": graph.n, "characteristics": table, "links": rows}
    if graph.coords is not None:
        doc["coords"] = [list(c) for c in graph.coords]
    if graph.grid_shape is not None:
        doc["grid_shape"] = list(graph.grid_shape)
    return doc


def graph_from_dict(doc: dict) -> NetworkGraph:
    fmt = doc.get("format", FILE_FORMAT)
    if fmt != FILE_FORMAT:
        raise ValueError(f"unsupported graph format {fmt!r}")
    if "links" in doc:
        table = {k: parse_characteristic(v) for k, v in doc.get("characteristics", {}).items()}
        links, caps, chars = [], [], []
        for row in doc["links"]:
            if len(row) != 4:
                raise TopologyError(f"link rows are [tail, head, capacitance, characteristic-id], got {row!r}")
            tail, head, cap, cid = row
            if cid not in table:
                raise TopologyError(f"unknown characteristic id {cid!r}")
            links.append(Link(_end_from_json(tail), _end_from_json(head)))
            caps.append(float(cap))
            chars.append(table[cid])
        coords = doc.get("coords")
        shape = doc.get("grid_shape")
        return NetworkGraph(
            n=int(doc["nodes"]),
            links=tuple(links),
            capacitances=np.array(caps),
            characteristics=tuple(chars),
            coords=tuple(tuple(c) for c in coords) if coords is not None else None,
            grid_shape=tuple(shape) if shape is not None else None,
        )
    if "grid" in doc:
        g = doc["grid"]
        source = tuple(g["source"]) if g.get("source") is not None else None
        char = parse_characteristic(doc["characteristic"]) if "characteristic" in doc else None
        return build_grid(g["rows"], g["cols"], source, char, doc.get("capacitance", 1.0))
    raise ValueError("graph document needs either 'links' or 'grid'")


def dumps_graph(graph: NetworkGraph) -> str:
    return json.dumps(graph_to_dict(graph), indent=1)


def loads_graph(text: str) -> NetworkGraph:
    return graph_from_dict(json.loads(text))


def save_graph(graph: NetworkGraph, path) -> None:
    Path(path).write_text(dumps_graph(graph) + "\n")


def load_graph(path) -> NetworkGraph:
    return loads_graph(Path(path).read_text())
