"""Piecewise-linear finite elements on metric graphs.

Used as an independent check of the secular solver: conforming elements give
eigenvalues from above, and counting FEM eigenvalues below a threshold bounds
the true count from below.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from .graph import MetricGraph
from .spectral import Spectrum

__all__ = [
    "MeshError",
    "Mesh",
    "build_mesh",
    "assemble",
    "fem_spectrum",
    "fem_eigenvalues",
    "fem_count_below",
    "rayleigh_quotient",
    "convergence_study",
    "richardson",
    "write_convergence_csv",
]

DENSE_LIMIT = 3000


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Uniform nodes per edge; vertex nodes are shared between edges.

    Node numbering: one node per vertex (in vertex order), then the interior
    nodes of each edge in edge order, tail to head.
    """

    graph: MetricGraph
    elements: tuple[int, ...]  # number of elements per edge
    vertex_node: dict
    edge_nodes: tuple[np.ndarray, ...]  # global node ids along each edge, endpoints included
    num_nodes: int

    def positions(self, i: int) -> np.ndarray:
        e = self.graph.edges[i]
        return np.linspace(0.0, e.length, self.elements[i] + 1)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.array(
            [self.vertex_node[v.id] for v in self.graph.vertices if v.condition.is_dirichlet], dtype=int
        )

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.num_nodes, dtype=bool)
        mask[self.dirichlet_nodes] = False
        return np.flatnonzero(mask)

    @property
    def h_max(self) -> float:
        return max(e.length / n for e, n in zip(self.graph.edges, self.elements))

    def interpolate(self, f: Callable) -> np.ndarray:
        """Nodal values of ``f(edge_id, x)``; vertex values come from the first edge seen."""
        out = np.zeros(self.num_nodes)
        seen = np.zeros(self.num_nodes, dtype=bool)
        for i, e in enumerate(self.graph.edges):
            nodes = self.edge_nodes[i]
            vals = np.asarray(f(e.id, self.positions(i)), dtype=float)
            fresh = ~seen[nodes]
            out[nodes[fresh]] = vals[fresh]
            seen[nodes] = True
        return out


def build_mesh(G: MetricGraph, h: float, multiplier: int = 1) -> Mesh:
    """Mesh with ``ceil(l_e / h) * multiplier`` elements on each edge."""
    if not h > 0:
        raise MeshError(f"mesh size must be positive, got {h!r}")
    elements = []
    for e in G.edges:
        n = math.ceil(e.length / h - 1e-12) * int(multiplier)
        if n < 2:
            raise MeshError(f"edge {e.id!r} (length {e.length:g}) gets {n} element(s) at h={h:g}; need >= 2")
        elements.append(n)
    vertex_node = {v.id: i for i, v in enumerate(G.vertices)}
    nxt = len(G.vertices)
    edge_nodes = []
    for e, n in zip(G.edges, elements):
        inner = np.arange(nxt, nxt + n - 1)
        nxt += n - 1
        edge_nodes.append(np.concatenate([[vertex_node[e.tail]], inner, [vertex_node[e.head]]]))
    return Mesh(G, tuple(elements), vertex_node, tuple(edge_nodes), nxt)


def assemble(mesh: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness (with delta strengths) and consistent mass, before elimination."""
    rows, cols, kv, mv = [], [], [], []
    for i, e in enumerate(mesh.graph.edges):
        nodes = mesh.edge_nodes[i]
        he = e.length / mesh.elements[i]
        a, b = nodes[:-1], nodes[1:]
        for r, c, ks, ms in ((a, a, 1.0, 2.0), (b, b, 1.0, 2.0), (a, b, -1.0, 1.0), (b, a, -1.0, 1.0)):
            rows.append(r)
            cols.append(c)
            kv.append(np.full(r.size, ks / he))
            mv.append(np.full(r.size, ms * he / 6.0))
    for v in mesh.graph.vertices:
        if not v.condition.is_dirichlet and v.condition.strength:
            j = mesh.vertex_node[v.id]
            rows.append(np.array([j]))
            cols.append(np.array([j]))
            kv.append(np.array([v.condition.strength]))
            mv.append(np.array([0.0]))
    r, c = np.concatenate(rows), np.concatenate(cols)
    n = mesh.num_nodes
    K = sp.coo_matrix((np.concatenate(kv), (r, c)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((np.concatenate(mv), (r, c)), shape=(n, n)).tocsr()
    return K, M


def _reduced(mesh: Mesh):
    K, M = assemble(mesh)
    free = mesh.free_nodes
    return K[free][:, free], M[free][:, free], free


def _solve(mesh: Mesh, count: int, vectors: bool = False):
    K, M, free = _reduced(mesh)
    n = free.size
    count = min(count, n)
    if n <= DENSE_LIMIT:
        res = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, count - 1],
                                eigvals_only=not vectors)
    else:
        # shift below zero: K + M is positive definite even for pure Kirchhoff graphs
        res = eigsh(K.tocsc(), k=count, M=M.tocsc(), sigma=-1.0, which="LM",
                    return_eigenvectors=vectors)
        if vectors:
            order = np.argsort(res[0])
            res = (res[0][order], res[1][:, order])
        else:
            res = np.sort(res)
    return res, free


def fem_eigenvalues(G: MetricGraph, count: int, h: float, multiplier: int = 1) -> np.ndarray:
    """The first ``count`` FEM eigenvalues (upper bounds for the exact ones)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    vals, _ = _solve(build_mesh(G, h, multiplier), count)
    vals = np.asarray(vals, dtype=float)
    # the constant mode of a Kirchhoff graph is exact; clip round-off
    return np.where(np.abs(vals) < 1e-11, 0.0, vals)


def fem_spectrum(G: MetricGraph, count: int, h: float, multiplier: int = 1,
                 cluster_rtol: float = 1e-9) -> Spectrum:
    vals = fem_eigenvalues(G, count, h, multiplier)
    distinct: list[float] = []
    mults: list[int] = []
    for x in vals:
        if distinct and abs(x - distinct[-1]) <= cluster_rtol * max(abs(x), 1.0):
            mults[-1] += 1
        else:
            distinct.append(float(x))
            mults.append(1)
    return Spectrum(tuple(distinct), tuple(mults), G.fingerprint())


def fem_count_below(G: MetricGraph, lam: float, h: float) -> int:
    """Number of FEM eigenvalues strictly below ``lam`` (a lower bound on the true count)."""
    mesh = build_mesh(G, h)
    K, M, free = _reduced(mesh)
    # Sylvester inertia: M is positive definite, so the count equals the
    # number of negative pivots of a symmetric LDL^T of K - lam M.
    lu = splu((K - lam * M).tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    piv = lu.U.diagonal()
    if np.array_equal(lu.perm_r, lu.perm_c) and np.all(np.isfinite(piv)) and np.all(piv != 0):
        return int(np.sum(piv < 0))
    if free.size <= DENSE_LIMIT:
        vals = scipy.linalg.eigh(K.toarray(), M.toarray(), eigvals_only=True,
                                 subset_by_value=(-np.inf, lam))
        return int(vals.size)
    k = 16
    while True:
        k = min(k, free.size - 1)
        vals = eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=-1.0, which="LM", return_eigenvectors=False)
        below = int(np.sum(vals < lam))
        if below < k or k == free.size - 1:
            return below
        k *= 2


def rayleigh_quotient(mesh: Mesh, f: np.ndarray) -> float:
    """Discrete ``(int f'^2 + sum alpha f(v)^2) / int f^2`` for nodal values ``f``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.num_nodes,):
        raise ValueError(f"expected {mesh.num_nodes} nodal values, got shape {f.shape}")
    dn = mesh.dirichlet_nodes
    if dn.size and np.max(np.abs(f[dn])) > 0:
        raise ValueError("test function must vanish at Dirichlet vertices")
    K, M = assemble(mesh)
    denom = float(f @ (M @ f))
    if denom <= 0:
        raise ValueError("test function is zero")
    return float(f @ (K @ f)) / denom


def richardson(coarse: np.ndarray, fine: np.ndarray, order: float = 2.0) -> np.ndarray:
    """Extrapolate values computed at h and h/2 assuming error ~ h**order."""
    f = 2.0**order
    return (f * np.asarray(fine) - np.asarray(coarse)) / (f - 1.0)


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    k: int
    lam: float
    order: float  # nan until three mesh sizes are available


def convergence_study(G: MetricGraph, count: int, hs: Sequence[float],
                      order_tol: float = 0.3) -> tuple[list[ConvergenceRow], list[int]]:
    """FEM eigenvalues over decreasing mesh sizes with observed orders.

    Returns the table and the indices ``k`` whose last observed order deviates
    from 2 by more than ``order_tol``.  When the sizes are integer ratios of the
    first one, meshes are nested refinements so the error expansion is exact.
    """
    hs = [float(h) for h in hs]
    if len(hs) < 3:
        raise ValueError("need at least three mesh sizes")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must be decreasing")
    vals = []
    for h in hs:
        ratio = hs[0] / h
        if abs(ratio - round(ratio)) < 1e-9:
            vals.append(fem_eigenvalues(G, count, hs[0], multiplier=int(round(ratio))))
        else:
            vals.append(fem_eigenvalues(G, count, h))
    vals = np.array(vals)
    rows = []
    flagged = set()
    for i, h in enumerate(hs):
        for k in range(vals.shape[1]):
            order = math.nan
            if i >= 2:
                d1 = vals[i - 2, k] - vals[i - 1, k]
                d2 = vals[i - 1, k] - vals[i, k]
                if d1 > 0 and d2 > 0:
                    order = math.log(d1 / d2) / math.log(hs[i - 1] / hs[i])
                if i == len(hs) - 1 and not abs(order - 2.0) <= order_tol:
                    flagged.add(k + 1)
            rows.append(ConvergenceRow(h, k + 1, float(vals[i, k]), order))
    return rows, sorted(flagged)


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["h", "k", "lambda", "order"])
        for r in rows:
            out.writerow([f"{r.h:.12g}", r.k, f"{r.lam:.12g}", "" if math.isnan(r.order) else f"{r.order:.12g}"])
