"""Named graph families and seeded random ensembles."""
from __future__ import annotations

import math

import numpy as np

from .graph import DIRICHLET, KIRCHHOFF, Edge, GraphError, MetricGraph, Vertex, VertexCondition

__all__ = [
    "interval",
    "equilateral_star",
    "star",
    "star_with_tail",
    "big_star",
    "balloon_bunch",
    "cycle",
    "random_tree",
    "random_graph",
    "make_family",
    "parse_family",
]


def _cond(c) -> VertexCondition:
    if isinstance(c, VertexCondition):
        return c
    key = str(c).strip().lower()
    if key in ("d", "dirichlet"):
        return DIRICHLET
    if key in ("n", "k", "neumann", "kirchhoff"):
        return KIRCHHOFF
    raise GraphError(f"unknown condition {c!r} (use D, N or K)")


def _positive(name: str, x: float) -> float:
    x = float(x)
    if not (math.isfinite(x) and x > 0):
        raise GraphError(f"{name} must be positive, got {x!r}")
    return x


def _count(name: str, n, minimum: int = 1) -> int:
    if int(n) != n or n < minimum:
        raise GraphError(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


def interval(L: float = 1.0, left="D", right="D") -> MetricGraph:
    L = _positive("length", L)
    return MetricGraph(
        (Vertex("v0", _cond(left)), Vertex("v1", _cond(right))),
        (Edge("e0", "v0", "v1", L),),
    )


def star(lengths, leaf="D", center="K") -> MetricGraph:
    """Star with one edge per entry of ``lengths``; edges run center -> leaf."""
    lengths = [_positive("edge length", l) for l in lengths]
    if not lengths:
        raise GraphError("a star needs at least one edge")
    verts = [Vertex("c", _cond(center))]
    edges = []
    for i, l in enumerate(lengths):
        verts.append(Vertex(f"leaf{i}", _cond(leaf)))
        edges.append(Edge(f"e{i}", "c", f"leaf{i}", l))
    return MetricGraph(tuple(verts), tuple(edges))


def equilateral_star(m: int, ell: float = 1.0, leaf="D", center="K") -> MetricGraph:
    m = _count("number of edges", m)
    return star([_positive("edge length", ell)] * m, leaf=leaf, center=center)


def star_with_tail(n: int, ell: float, r: float, tip="D", leaf="D", center="K") -> MetricGraph:
    """``n`` legs of length ``ell`` plus a tail of length ``r`` ending at vertex ``tip``."""
    n = _count("number of legs", n)
    G = star([ell] * n, leaf=leaf, center=center)
    verts = G.vertices + (Vertex("tip", _cond(tip)),)
    edges = G.edges + (Edge("tail", "c", "tip", _positive("tail length", r)),)
    return MetricGraph(verts, edges)


def big_star(tail: float = 1.0, m: int = 7, eps: float = 0.05, tip="K") -> MetricGraph:
    """Long Dirichlet-ended edge plus ``m`` short edges of length ``eps``.

    With ``m = 0`` the result is the bare long edge, whose free end carries the
    ``tip`` condition.
    """
    tail = _positive("tail length", tail)
    m = _count("number of short edges", m, minimum=0)
    verts = [Vertex("root", DIRICHLET), Vertex("c", _cond(tip) if m == 0 else KIRCHHOFF)]
    edges = [Edge("long", "root", "c", tail)]
    if m:
        eps = _positive("short edge length", eps)
    for i in range(m):
        verts.append(Vertex(f"tip{i}", _cond(tip)))
        edges.append(Edge(f"s{i}", "c", f"tip{i}", eps))
    return MetricGraph(tuple(verts), tuple(edges))


def balloon_bunch(beta: int = 3, loop: float = 0.1, tail: float = 1.0, tip="D") -> MetricGraph:
    """``beta`` loops of length ``loop`` hanging off the end of a tail."""
    beta = _count("number of loops", beta)
    loop = _positive("loop length", loop)
    verts = (Vertex("root", _cond(tip)), Vertex("c", KIRCHHOFF))
    edges = [Edge("tail", "root", "c", _positive("tail length", tail))]
    edges += [Edge(f"loop{i}", "c", "c", loop) for i in range(beta)]
    return MetricGraph(verts, tuple(edges))


def cycle(L: float = 1.0) -> MetricGraph:
    return MetricGraph((Vertex("v0", KIRCHHOFF),), (Edge("e0", "v0", "v0", _positive("length", L)),))


def _log_uniform(rng: np.random.Generator, lo: float, hi: float, size=None):
    if not (0 < lo <= hi):
        raise GraphError(f"length range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=size))


def random_tree(
    seed: int,
    max_edges: int = 8,
    length_range: tuple[float, float] = (0.1, 2.0),
    leaf="D",
    min_edges: int = 1,
) -> MetricGraph:
    """Uniform-attachment random tree; every leaf gets ``leaf``, the rest Kirchhoff."""
    max_edges = _count("max_edges", max_edges)
    rng = np.random.default_rng(seed)
    m = int(rng.integers(min(min_edges, max_edges), max_edges + 1))
    parents = [int(rng.integers(0, i)) for i in range(1, m + 1)]
    lengths = _log_uniform(rng, *length_range, size=m)
    deg = [0] * (m + 1)
    for child, p in enumerate(parents, start=1):
        deg[child] += 1
        deg[p] += 1
    leaf_c = _cond(leaf)
    verts = tuple(Vertex(f"v{i}", leaf_c if deg[i] == 1 else KIRCHHOFF) for i in range(m + 1))
    edges = tuple(
        Edge(f"e{child - 1}", f"v{p}", f"v{child}", float(l))
        for (child, p), l in zip(enumerate(parents, start=1), lengths)
    )
    return MetricGraph(verts, edges)


def random_graph(
    seed: int,
    max_edges: int = 8,
    beta: int = 1,
    neumann: int = 1,
    length_range: tuple[float, float] = (0.1, 2.0),
) -> MetricGraph:
    """Random tree plus ``beta`` extra edges (loops and parallels allowed).

    Up to ``neumann`` leaves become Neumann, the remaining leaves Dirichlet.
    At least one Dirichlet leaf is kept whenever the graph has leaves to spare.
    """
    rng = np.random.default_rng([seed, 7919])
    tree = random_tree(seed, max_edges=max_edges, length_range=length_range, leaf="D")
    ids = [v.id for v in tree.vertices]
    edges = list(tree.edges)
    for i in range(beta):
        a, b = (ids[int(j)] for j in rng.integers(0, len(ids), size=2))
        edges.append(Edge(f"x{i}", a, b, float(_log_uniform(rng, *length_range))))
    G = MetricGraph(tuple(Vertex(v, KIRCHHOFF) for v in ids), tuple(edges))
    leaves = G.leaves()
    order = list(rng.permutation(len(leaves)))
    n_neu = min(neumann, max(len(leaves) - 1, 0))
    neu = {leaves[int(i)] for i in order[:n_neu]}
    for v in leaves:
        G = G.with_condition(v, KIRCHHOFF if v in neu else DIRICHLET)
    return G


def make_family(name: str, **params) -> MetricGraph:
    builders = {
        "interval": interval,
        "equilateral_star": equilateral_star,
        "star": equilateral_star,
        "star_with_tail": star_with_tail,
        "big_star": big_star,
        "bigstar": big_star,
        "balloon_bunch": balloon_bunch,
        "balloons": balloon_bunch,
        "cycle": cycle,
        "random_tree": random_tree,
        "randtree": random_tree,
        "random_graph": random_graph,
    }
    try:
        builder = builders[name]
    except KeyError:
        raise GraphError(f"unknown family {name!r}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise GraphError(f"bad parameters for family {name!r}: {exc}") from exc


def parse_family(text: str, ends: str | None = None, seed: int | None = None,
                 leaf: str | None = None, center: str | None = None) -> MetricGraph:
    """Parse the command-line family mini-language.

    ``interval:L``, ``star:m:ell``, ``startail:n:ell:r``, ``bigstar:tail:m:eps``,
    ``balloons:beta:loop:tail``, ``cycle:L``, ``randtree:maxE`` and
    ``randgraph:maxE:beta:N``.
    """
    name, *args = text.split(":")
    try:
        nums = [float(a) for a in args]
    except ValueError:
        raise GraphError(f"non-numeric parameter in family spec {text!r}") from None

    def need(lo: int, hi: int | None = None):
        hi = lo if hi is None else hi
        if not lo <= len(nums) <= hi:
            raise GraphError(f"family {name!r} takes {lo}..{hi} parameters, got {len(nums)}")

    if name == "interval":
        need(0, 1)
        left, right = (ends or "D,D").split(",")
        return interval(nums[0] if nums else 1.0, left, right)
    if name == "star":
        need(1, 2)
        return equilateral_star(nums[0], nums[1] if len(nums) > 1 else 1.0,
                                leaf=leaf or "D", center=center or "K")
    if name == "startail":
        need(3)
        return star_with_tail(nums[0], nums[1], nums[2], tip=leaf or "D")
    if name == "bigstar":
        need(3)
        return big_star(nums[0], nums[1], nums[2], tip=leaf or "K")
    if name == "balloons":
        need(3)
        return balloon_bunch(nums[0], nums[1], nums[2])
    if name == "cycle":
        need(0, 1)
        return cycle(nums[0] if nums else 1.0)
    if name == "randtree":
        need(1)
        return random_tree(0 if seed is None else seed, int(nums[0]), leaf=leaf or "D")
    if name == "randgraph":
        need(3)
        return random_graph(0 if seed is None else seed, int(nums[0]), int(nums[1]), int(nums[2]))
    raise GraphError(f"unknown family {name!r}")
