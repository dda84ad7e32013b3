"""Compact metric graphs with Dirichlet / delta vertex conditions.

A :class:`MetricGraph` is immutable; every mutation (dummy insertion,
suppression, contraction, condition changes) returns a new graph.  Edges are
oriented by construction: the coordinate ``x = 0`` sits at ``edge.tail`` and
``x = edge.length`` at ``edge.head``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

__all__ = [
    "GraphError",
    "VertexCondition",
    "DIRICHLET",
    "KIRCHHOFF",
    "Vertex",
    "Edge",
    "MetricGraph",
    "GraphStats",
    "Topology",
    "graph_stats",
    "insert_dummy",
    "suppress_dummies",
    "contract_edge",
    "split_at_vertex",
    "split_loops",
    "graph_to_dict",
    "graph_from_dict",
    "read_graph",
    "write_graph",
]


class GraphError(ValueError):
    """Raised for invalid graph construction or an impossible mutation."""


@dataclass(frozen=True)
class VertexCondition:
    """Either a Dirichlet condition or a delta condition of finite strength.

    ``VertexCondition("delta", 0.0)`` is the standard (Kirchhoff) condition,
    which reduces to Neumann at degree-one vertices.
    """

    kind: str = "delta"
    strength: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("dirichlet", "delta"):
            raise GraphError(f"unknown vertex condition kind {self.kind!r}")
        if self.kind == "dirichlet":
            object.__setattr__(self, "strength", 0.0)
        elif not math.isfinite(self.strength):
            raise GraphError("delta strength must be finite; use Dirichlet instead")
        else:
            object.__setattr__(self, "strength", float(self.strength))

    @classmethod
    def dirichlet(cls) -> "VertexCondition":
        return cls("dirichlet")

    @classmethod
    def delta(cls, strength: float = 0.0) -> "VertexCondition":
        return cls("delta", strength)

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"

    @property
    def is_kirchhoff(self) -> bool:
        return self.kind == "delta" and self.strength == 0.0

    def merged(self, other: "VertexCondition") -> "VertexCondition":
        """Condition at a vertex created by collapsing a zero-length edge."""
        if self.is_dirichlet or other.is_dirichlet:
            return DIRICHLET
        return VertexCondition.delta(self.strength + other.strength)

    def to_json(self):
        return "dirichlet" if self.is_dirichlet else {"delta": self.strength}

    @classmethod
    def from_json(cls, obj) -> "VertexCondition":
        if obj == "dirichlet":
            return DIRICHLET
        if obj in ("kirchhoff", "neumann", None):
            return KIRCHHOFF
        if isinstance(obj, dict) and set(obj) == {"delta"}:
            return cls.delta(float(obj["delta"]))
        raise GraphError(f"cannot parse vertex condition {obj!r}")

    def __str__(self) -> str:
        if self.is_dirichlet:
            return "D"
        return "K" if self.strength == 0.0 else f"delta({self.strength:g})"


DIRICHLET = VertexCondition("dirichlet")
KIRCHHOFF = VertexCondition("delta", 0.0)


@dataclass(frozen=True)
class Vertex:
    id: Hashable
    condition: VertexCondition = KIRCHHOFF


@dataclass(frozen=True)
class Edge:
    id: Hashable
    tail: Hashable
    head: Hashable
    length: float

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head


@dataclass(frozen=True)
class GraphStats:
    total_length: float
    num_edges: int
    num_vertices: int
    betti: int
    dirichlet_leaves: int
    neumann_leaves: int

    def as_dict(self) -> dict:
        return {
            "L": self.total_length,
            "m": self.num_edges,
            "n": self.num_vertices,
            "beta": self.betti,
            "D": self.dirichlet_leaves,
            "N": self.neumann_leaves,
        }


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        vindex: dict = {}
        for pos, v in enumerate(self.vertices):
            if v.id in vindex:
                raise GraphError(f"duplicate vertex id {v.id!r}")
            vindex[v.id] = pos
        eids = set()
        for e in self.edges:
            if e.id in eids:
                raise GraphError(f"duplicate edge id {e.id!r}")
            eids.add(e.id)
            if e.tail not in vindex or e.head not in vindex:
                raise GraphError(f"edge {e.id!r} references an unknown vertex")
            if not (math.isfinite(e.length) and e.length > 0.0):
                raise GraphError(f"edge {e.id!r} has non-positive length {e.length!r}")
        if not self.edges:
            raise GraphError("a metric graph needs at least one edge")
        if not _connected(vindex, self.edges):
            raise GraphError("graph is not connected")
        eindex = {e.id: pos for pos, e in enumerate(self.edges)}
        object.__setattr__(self, "_index", {"v": vindex, "e": eindex})

    # -- lookups -----------------------------------------------------------
    def vertex(self, vid) -> Vertex:
        try:
            return self.vertices[self._index["v"][vid]]
        except KeyError:
            raise GraphError(f"no vertex {vid!r}") from None

    def edge(self, eid) -> Edge:
        try:
            return self.edges[self._index["e"][eid]]
        except KeyError:
            raise GraphError(f"no edge {eid!r}") from None

    def edge_position(self, eid) -> int:
        return self._index["e"][eid]

    def condition(self, vid) -> VertexCondition:
        return self.vertex(vid).condition

    def degree(self, vid) -> int:
        return sum((e.tail == vid) + (e.head == vid) for e in self.edges)

    def degrees(self) -> dict:
        deg = {v.id: 0 for v in self.vertices}
        for e in self.edges:
            deg[e.tail] += 1
            deg[e.head] += 1
        return deg

    def incident(self, vid) -> list[tuple[Edge, int]]:
        """(edge, end) pairs at ``vid``; end 0 is the tail, 1 the head."""
        out = []
        for e in self.edges:
            if e.tail == vid:
                out.append((e, 0))
            if e.head == vid:
                out.append((e, 1))
        return out

    def leaves(self) -> list:
        deg = self.degrees()
        return [v.id for v in self.vertices if deg[v.id] == 1]

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    @property
    def lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.edges], dtype=float)

    @property
    def edge_ids(self) -> list:
        return [e.id for e in self.edges]

    @property
    def betti(self) -> int:
        return len(self.edges) - len(self.vertices) + 1

    @property
    def is_tree(self) -> bool:
        return self.betti == 0

    def has_dirichlet(self) -> bool:
        return any(v.condition.is_dirichlet for v in self.vertices)

    def is_dirichlet_tree(self) -> bool:
        """Tree with Dirichlet leaves and Kirchhoff conditions everywhere else."""
        if not self.is_tree:
            return False
        deg = self.degrees()
        for v in self.vertices:
            if deg[v.id] == 1:
                if not v.condition.is_dirichlet:
                    return False
            elif not v.condition.is_kirchhoff:
                return False
        return True

    # -- functional updates ------------------------------------------------
    def with_lengths(self, lengths: Sequence[float]) -> "MetricGraph":
        lengths = list(lengths)
        if len(lengths) != len(self.edges):
            raise GraphError("length vector does not match the edge count")
        edges = tuple(replace(e, length=float(l)) for e, l in zip(self.edges, lengths))
        return MetricGraph(self.vertices, edges)

    def scaled(self, s: float) -> "MetricGraph":
        return self.with_lengths(self.lengths * s)

    def with_condition(self, vid, condition: VertexCondition) -> "MetricGraph":
        self.vertex(vid)
        verts = tuple(replace(v, condition=condition) if v.id == vid else v for v in self.vertices)
        return MetricGraph(verts, self.edges)

    def fingerprint(self) -> str:
        blob = json.dumps(graph_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def __str__(self) -> str:
        s = graph_stats(self)
        return (
            f"MetricGraph(m={s.num_edges}, n={s.num_vertices}, L={s.total_length:.6g}, "
            f"beta={s.betti}, D={s.dirichlet_leaves}, N={s.neumann_leaves})"
        )


def _connected(vindex: dict, edges: Iterable[Edge]) -> bool:
    parent = list(range(len(vindex)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for e in edges:
        a, b = find(vindex[e.tail]), find(vindex[e.head])
        if a != b:
            parent[a] = b
    return len({find(i) for i in range(len(vindex))}) == 1


def graph_stats(G: MetricGraph) -> GraphStats:
    deg = G.degrees()
    D = N = 0
    for v in G.vertices:
        if deg[v.id] != 1:
            continue
        if v.condition.is_dirichlet:
            D += 1
        elif v.condition.is_kirchhoff:
            N += 1
    return GraphStats(
        total_length=G.total_length,
        num_edges=len(G.edges),
        num_vertices=len(G.vertices),
        betti=G.betti,
        dirichlet_leaves=D,
        neumann_leaves=N,
    )


def _fresh_id(taken: set, base: str):
    if base not in taken:
        return base
    i = 1
    while f"{base}.{i}" in taken:
        i += 1
    return f"{base}.{i}"


def insert_dummy(G: MetricGraph, edge, x: float, vertex_id=None) -> MetricGraph:
    """Split ``edge`` at distance ``x`` from its tail with a Kirchhoff vertex."""
    e = G.edge(edge)
    if not (0.0 < x < e.length):
        raise GraphError(f"split point {x!r} is not interior to edge {edge!r} (length {e.length!r})")
    vids = {v.id for v in G.vertices}
    eids = {f.id for f in G.edges}
    new_v = vertex_id if vertex_id is not None else _fresh_id(vids, f"{e.id}@{x:.6g}")
    if new_v in vids:
        raise GraphError(f"vertex id {new_v!r} already used")
    second = _fresh_id(eids, f"{e.id}'")
    verts = G.vertices + (Vertex(new_v, KIRCHHOFF),)
    edges = []
    for f in G.edges:
        if f.id == e.id:
            edges.append(Edge(e.id, e.tail, new_v, x))
            edges.append(Edge(second, new_v, e.head, e.length - x))
        else:
            edges.append(f)
    return MetricGraph(verts, tuple(edges))


def suppress_dummies(G: MetricGraph) -> MetricGraph:
    """Merge away every degree-two Kirchhoff vertex (lengths add up).

    A dummy whose two edge-ends belong to one loop is kept, since removing it
    would leave a vertex-free circle.
    """
    verts = list(G.vertices)
    edges = list(G.edges)
    changed = True
    while changed:
        changed = False
        deg = {v.id: 0 for v in verts}
        for e in edges:
            deg[e.tail] += 1
            deg[e.head] += 1
        for v in verts:
            if deg[v.id] != 2 or not v.condition.is_kirchhoff:
                continue
            inc = [e for e in edges if e.tail == v.id or e.head == v.id]
            if len(inc) != 2:
                continue  # a loop at v
            e1, e2 = inc
            a = e1.tail if e1.head == v.id else e1.head
            b = e2.head if e2.tail == v.id else e2.tail
            # orient the merged edge along e1 when possible
            if e1.head == v.id:
                merged = Edge(e1.id, e1.tail, b, e1.length + e2.length)
            else:
                merged = Edge(e1.id, a, b, e1.length + e2.length)
            edges = [merged if f.id == e1.id else f for f in edges if f.id != e2.id]
            verts = [w for w in verts if w.id != v.id]
            changed = True
            break
    return MetricGraph(tuple(verts), tuple(edges))


def contract_edge(G: MetricGraph, edge, allow_loop: bool = False) -> MetricGraph:
    """Collapse ``edge`` to a point; the merged vertex keeps the tail id.

    Conditions merge as: Dirichlet absorbs, otherwise delta strengths add.
    Contracting a loop just deletes it (only with ``allow_loop``).
    """
    e = G.edge(edge)
    if len(G.edges) == 1:
        raise GraphError("cannot contract the only edge of a graph")
    if e.is_loop:
        if not allow_loop:
            raise GraphError(f"edge {edge!r} is a loop; pass allow_loop=True to delete it")
        return MetricGraph(G.vertices, tuple(f for f in G.edges if f.id != e.id))
    keep, gone = e.tail, e.head
    cond = G.condition(keep).merged(G.condition(gone))
    verts = tuple(
        replace(v, condition=cond) if v.id == keep else v for v in G.vertices if v.id != gone
    )
    edges = []
    for f in G.edges:
        if f.id == e.id:
            continue
        tail = keep if f.tail == gone else f.tail
        head = keep if f.head == gone else f.head
        edges.append(Edge(f.id, tail, head, f.length))
    return MetricGraph(verts, tuple(edges))


def split_at_vertex(G: MetricGraph, vid) -> list[MetricGraph]:
    """Cut a Dirichlet vertex into one Dirichlet leaf per incident edge-end.

    Returns the connected components of the result.  The spectrum of ``G`` is
    the union (with multiplicity) of the components' spectra.
    """
    if not G.condition(vid).is_dirichlet:
        raise GraphError("only Dirichlet vertices can be cut without changing the spectrum")
    inc = G.incident(vid)
    verts = [v for v in G.vertices if v.id != vid]
    taken = {v.id for v in G.vertices}
    edges = []
    copies = {}
    for i, (e, end) in enumerate(inc):
        cid = _fresh_id(taken, f"{vid}#{i}")
        taken.add(cid)
        copies[(e.id, end)] = cid
        verts.append(Vertex(cid, DIRICHLET))
    for f in G.edges:
        tail = copies.get((f.id, 0), f.tail)
        head = copies.get((f.id, 1), f.head)
        edges.append(Edge(f.id, tail, head, f.length))
    return _components(verts, edges)


def _components(verts: list[Vertex], edges: list[Edge]) -> list[MetricGraph]:
    adj: dict = {v.id: [] for v in verts}
    for e in edges:
        adj[e.tail].append(e)
        adj[e.head].append(e)
    seen: set = set()
    out = []
    for v in verts:
        if v.id in seen or not adj[v.id]:
            continue
        stack = [v.id]
        comp_v = set()
        comp_e: dict = {}
        while stack:
            u = stack.pop()
            if u in comp_v:
                continue
            comp_v.add(u)
            for e in adj[u]:
                comp_e[e.id] = e
                stack.extend(w for w in (e.tail, e.head) if w not in comp_v)
        seen |= comp_v
        out.append(
            MetricGraph(
                tuple(w for w in verts if w.id in comp_v),
                tuple(e for e in edges if e.id in comp_e),
            )
        )
    return out


def split_loops(G: MetricGraph) -> tuple[MetricGraph, dict]:
    """Insert a dummy vertex at each loop midpoint.

    Returns the new graph and a map from each new edge id to
    ``(original edge id, offset of its tail along the original edge)``.
    """
    origin = {e.id: (e.id, 0.0) for e in G.edges}
    loops = [e for e in G.edges if e.is_loop]
    if not loops:
        return G, origin
    H = G
    for e in loops:
        before = {f.id for f in H.edges}
        H = insert_dummy(H, e.id, 0.5 * e.length)
        (new,) = {f.id for f in H.edges} - before
        origin[new] = (e.id, 0.5 * e.length)
    return H, origin


@dataclass(frozen=True)
class Topology:
    """A discrete graph with vertex conditions; lengths are supplied separately."""

    vertices: tuple[Vertex, ...]
    edges: tuple[tuple, ...]  # (id, tail, head)

    @classmethod
    def of(cls, G: MetricGraph) -> "Topology":
        return cls(G.vertices, tuple((e.id, e.tail, e.head) for e in G.edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def realize(self, lengths: Sequence[float]) -> MetricGraph:
        """Metric graph for a length vector; zero entries are contracted."""
        lengths = [float(l) for l in lengths]
        if len(lengths) != len(self.edges):
            raise GraphError("length vector does not match the topology")
        if any(l < 0 or not math.isfinite(l) for l in lengths) or not any(l > 0 for l in lengths):
            raise GraphError("lengths must lie in the closed positive quadrant minus the origin")
        # zero-length edges are realized with a placeholder length, then contracted
        G = MetricGraph(
            self.vertices,
            tuple(Edge(i, t, h, l if l > 0 else 1.0) for (i, t, h), l in zip(self.edges, lengths)),
        )
        for (eid, _, _), l in zip(self.edges, lengths):
            if l == 0.0:
                G = contract_edge(G, eid, allow_loop=True)
        return G


# -- JSON file format --------------------------------------------------------

def graph_to_dict(G: MetricGraph) -> dict:
    return {
        "vertices": [{"id": v.id, "condition": v.condition.to_json()} for v in G.vertices],
        "edges": [
            {"id": e.id, "from": e.tail, "to": e.head, "length": e.length} for e in G.edges
        ],
    }


def graph_from_dict(data: dict) -> MetricGraph:
    try:
        verts = tuple(
            Vertex(_hashable(v["id"]), VertexCondition.from_json(v.get("condition", None)))
            for v in data["vertices"]
        )
        edges = tuple(
            Edge(_hashable(e["id"]), _hashable(e["from"]), _hashable(e["to"]), float(e["length"]))
            for e in data["edges"]
        )
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph description: {exc}") from exc
    return MetricGraph(verts, edges)


def _hashable(x):
    return tuple(x) if isinstance(x, list) else x


def write_graph(G: MetricGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(G), indent=1) + "\n")


def read_graph(path) -> MetricGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))
