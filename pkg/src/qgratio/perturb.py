"""Edge-length derivatives of eigenvalues and ratio optimization.

The derivative of a simple eigenvalue with respect to the length of edge
``e`` is ``-(psi'^2 + lambda psi^2)``, which is constant along the edge and
equals ``-lambda (A^2 + B^2)`` for the normalized wave ``A cos + B sin``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .families import star_with_tail
from .graph import KIRCHHOFF, GraphError, MetricGraph, contract_edge, split_at_vertex
from .spectral import Eigenfunction, compute_spectrum, eigenfunctions

log = logging.getLogger(__name__)

__all__ = [
    "NotDifferentiableError",
    "NonConvergenceError",
    "hadamard_derivative",
    "hadamard_gradient",
    "fd_derivative",
    "RatioGradient",
    "ratio_gradient",
    "IndexRatio",
    "VertexConditionRatio",
    "parse_objective",
    "Iterate",
    "OptimizeTrace",
    "optimize_ratio",
    "project_simplex",
    "critical_point_diagnostics",
    "balancing_point",
]


class NotDifferentiableError(ValueError):
    """The eigenvalue is multiple, so it has no edge-length derivative."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: "OptimizeTrace | None" = None):
        super().__init__(message)
        self.trace = trace


def _simple_eigenfunction(G: MetricGraph, k: int, verify: bool = True) -> Eigenfunction:
    spec = compute_spectrum(G, k, verify=verify)
    if spec.multiplicity_of(k) != 1:
        raise NotDifferentiableError(
            f"lambda_{k} = {spec.lam(k):.12g} has multiplicity {spec.multiplicity_of(k)}; "
            "the length derivative needs a simple eigenvalue"
        )
    (ef,) = eigenfunctions(G, spec.lam(k))
    return ef


def hadamard_gradient(G: MetricGraph, k: int, ef: Eigenfunction | None = None,
                      check: bool = True) -> np.ndarray:
    """``d lambda_k / d l_e`` for every edge, in edge order."""
    if ef is None:
        ef = _simple_eigenfunction(G, k)
    lam = ef.lam
    out = np.empty(len(G.edges))
    for i, e in enumerate(G.edges):
        w = ef.wave(e.id)
        val = -lam * (w.A**2 + w.B**2)
        if check:
            xs = e.length * np.array([0.25, 0.5, 0.75])
            along = -(ef.derivative(e.id, xs) ** 2) - lam * ef.value(e.id, xs) ** 2
            dev = float(np.max(np.abs(along - val)))
            if dev > 1e-9 * max(1.0, abs(val)):
                raise ArithmeticError(f"derivative density not constant on edge {e.id!r} (dev {dev:.2e})")
        out[i] = val
    return out


def hadamard_derivative(G: MetricGraph, k: int, edge) -> float:
    """``d lambda_k / d l_edge`` for a simple eigenvalue."""
    return float(hadamard_gradient(G, k)[G.edge_position(edge)])


def fd_derivative(G: MetricGraph, k: int, edge, h: float = 1e-5) -> float:
    """Central finite difference of ``lambda_k`` in the length of ``edge``."""
    i = G.edge_position(edge)
    lengths = G.lengths

    def lam(delta):
        ls = lengths.copy()
        ls[i] += delta
        return compute_spectrum(G.with_lengths(ls), k, verify=False).lam(k)

    return (lam(h) - lam(-h)) / (2 * h)


# ---------------------------------------------------------------------------
# objectives

@dataclass(frozen=True)
class RatioGradient:
    ratio: float
    gradient: np.ndarray  # over edges of the graph, in edge order
    balance_residual: float  # sup norm of grad(num)/num - grad(den)/den
    numerator: float
    denominator: float


def _quotient(num, dnum, den, dden) -> RatioGradient:
    ratio = num / den
    grad = (dnum * den - num * dden) / den**2
    rel_n = dnum / num if num else np.zeros_like(dnum)
    rel_d = dden / den if den else np.zeros_like(dden)
    return RatioGradient(ratio, grad, float(np.max(np.abs(rel_n - rel_d))), num, den)


@dataclass(frozen=True)
class IndexRatio:
    """``lambda_k / lambda_j`` on one graph."""

    k: int
    j: int

    def __post_init__(self):
        if not (self.k >= 1 and self.j >= 1 and self.k != self.j):
            raise ValueError(f"need distinct indices >= 1, got ({self.k}, {self.j})")

    def graphs(self, G: MetricGraph) -> tuple[MetricGraph, MetricGraph]:
        return G, G

    def evaluate(self, G: MetricGraph, Gd: MetricGraph | None = None, grad: bool = True):
        spec = compute_spectrum(G, max(self.k, self.j))
        num, den = spec.lam(self.k), spec.lam(self.j)
        if not grad:
            return num / den
        for idx in (self.k, self.j):
            if spec.multiplicity_of(idx) != 1:
                raise NotDifferentiableError(f"lambda_{idx} is multiple")
        (ek,) = eigenfunctions(G, num)
        (ej,) = eigenfunctions(G, den)
        return _quotient(num, hadamard_gradient(G, self.k, ek, check=False),
                         den, hadamard_gradient(G, self.j, ej, check=False))

    def label(self) -> str:
        return f"ratio:{self.k}:{self.j}"


def _dirichlet_parts(G: MetricGraph) -> list[MetricGraph]:
    """Components left after cutting every interior Dirichlet vertex."""
    for v in G.vertices:
        if v.condition.is_dirichlet and G.degree(v.id) > 1:
            return [p for c in split_at_vertex(G, v.id) for p in _dirichlet_parts(c)]
    return [G]


def _first_by_parts(G: MetricGraph, grad: bool, tol: float = 1e-9):
    """``lambda_1`` of ``G`` (and its length gradient) from its decoupled pieces.

    Solving the pieces separately keeps near-equal decoupled intervals out of
    the secular scan, where they form root clusters the scan resolves poorly.
    """
    parts = _dirichlet_parts(G)
    firsts = [(compute_spectrum(P, 1), P) for P in parts]
    lam = min(s.lam(1) for s, _ in firsts)
    if not grad:
        return lam, None
    active = [(s, P) for s, P in firsts if s.lam(1) <= lam * (1 + tol)]
    if len(active) > 1 or active[0][0].multiplicity_of(1) != 1:
        raise NotDifferentiableError("first eigenvalue is multiple")
    s, P = active[0]
    (ef,) = eigenfunctions(P, s.lam(1))
    gp = dict(zip((e.id for e in P.edges), hadamard_gradient(P, 1, ef, check=False)))
    return lam, np.array([gp.get(e.id, 0.0) for e in G.edges])


@dataclass(frozen=True)
class VertexConditionRatio:
    """``lambda_1(G) / tau_1``, where ``tau_1`` has ``leaf`` switched to Kirchhoff."""

    leaf: object

    def graphs(self, G: MetricGraph) -> tuple[MetricGraph, MetricGraph]:
        if not G.condition(self.leaf).is_dirichlet or G.degree(self.leaf) != 1:
            raise GraphError(f"{self.leaf!r} must be a Dirichlet leaf")
        return G, G.with_condition(self.leaf, KIRCHHOFF)

    def evaluate(self, G: MetricGraph, Gd: MetricGraph, grad: bool = True):
        num, gnum = _first_by_parts(G, grad)
        den, gden = _first_by_parts(Gd, grad)
        if not grad:
            return num / den
        return _quotient(num, gnum, den, gden)

    def label(self) -> str:
        return f"vc:{self.leaf}"


def parse_objective(text: str):
    """``ratio:k:j`` or ``vc:<leaf id>``."""
    kind, _, rest = text.partition(":")
    if kind == "ratio":
        parts = rest.split(":")
        if len(parts) != 2:
            raise ValueError(f"malformed objective {text!r}; expected ratio:k:j")
        try:
            k, j = (int(p) for p in parts)
        except ValueError:
            raise ValueError(f"malformed objective {text!r}; indices must be integers") from None
        return IndexRatio(k, j)
    if kind == "vc" and rest:
        return VertexConditionRatio(rest)
    raise ValueError(f"malformed objective {text!r}; expected ratio:k:j or vc:<leaf>")


def ratio_gradient(G: MetricGraph, k: int, j: int) -> RatioGradient:
    """Gradient of ``lambda_k / lambda_j`` over edge lengths (both must be simple)."""
    return IndexRatio(k, j).evaluate(G)


# ---------------------------------------------------------------------------
# optimizer

def project_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = total}``."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


@dataclass
class Iterate:
    restart: int
    iteration: int
    edges: list
    lengths: list
    ratio: float
    gradient: list
    step: float
    events: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, default=str)


@dataclass
class OptimizeTrace:
    objective: str
    mode: str
    iterates: list[Iterate] = field(default_factory=list)
    status: str = "running"
    final_graph: MetricGraph | None = None

    @property
    def final_ratio(self) -> float:
        return self.iterates[-1].ratio

    @property
    def contracted(self) -> list:
        return [ev for it in self.iterates for ev in it.events if ev.startswith("contract")]

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for it in self.iterates:
                fh.write(it.to_json() + "\n")


def _contract_short(G, Gd, y, short):
    """Contract the edges in ``short`` in both graphs and renormalize the rest of ``y``."""
    rest = np.array([l for e, l in zip(G.edges, y) if e.id not in short])
    G2, Gd2 = G, Gd
    for eid in short:
        if len(G2.edges) == 1:
            break
        G2 = contract_edge(G2, eid, allow_loop=True)
        Gd2 = contract_edge(Gd2, eid, allow_loop=True)
    rest = rest / rest.sum()
    return G2.with_lengths(rest), Gd2.with_lengths(rest)


def _drop_inert(G: MetricGraph, Gd: MetricGraph, objective, tol: float = 1e-9):
    """Split interior Dirichlet vertices; keep only the leaf's component if it carries the ratio."""
    if not isinstance(objective, VertexConditionRatio):
        return G, Gd
    interior = [v.id for v in G.vertices if v.condition.is_dirichlet and G.degree(v.id) > 1]
    if not interior:
        return G, Gd
    lam = compute_spectrum(G, 1).lam(1)
    tau = compute_spectrum(Gd, 1).lam(1)
    for vid in interior:
        if not Gd.condition(vid).is_dirichlet:
            continue
        for comp in split_at_vertex(G, vid):
            ids = {e.id for e in comp.edges}
            if objective.leaf not in {v.id for v in comp.vertices}:
                continue
            # the same cut applied to the tau graph, restricted to these edges
            comp_d = next(c for c in split_at_vertex(Gd, vid) if {e.id for e in c.edges} == ids)
            lc = compute_spectrum(comp, 1).lam(1)
            tc = compute_spectrum(comp_d, 1).lam(1)
            if abs(lc - lam) <= tol * lam and abs(tc - tau) <= tol * tau and len(ids) < len(G.edges):
                return _drop_inert(comp, comp_d, objective, tol)
    return G, Gd


def optimize_ratio(
    G0: MetricGraph,
    objective,
    mode: str = "max",
    eps_floor: float = 1e-6,
    max_iter: int = 400,
    max_restarts: int = 20,
    gtol: float = 1e-8,
    seed: int = 0,
    stall_window: int = 5,
    stall_tol: float = 1e-9,
) -> OptimizeTrace:
    """Projected gradient on the length simplex with Armijo backtracking.

    Edges shorter than ``eps_floor`` (relative to total length) are contracted
    and the run restarts on the smaller graph.  Multiple eigenvalues on the
    path trigger a relative length jitter of 1e-9 (at most 5 times in a row).
    A run whose objective gains less than ``stall_tol`` (relative) over
    ``stall_window`` iterations ends with status "stalled".
    """
    if mode not in ("max", "min"):
        raise ValueError(f"mode must be max or min, got {mode!r}")
    if isinstance(objective, str):
        objective = parse_objective(objective)
    if np.any(G0.lengths <= 0):
        raise ValueError("initial lengths must be positive")
    sign = 1.0 if mode == "max" else -1.0
    rng = np.random.default_rng(seed)
    trace = OptimizeTrace(objective.label(), mode)
    G, Gd = objective.graphs(G0.scaled(1.0 / G0.total_length))
    events: list = []
    restart = 0
    while True:
        G, Gd = _drop_inert(G, Gd, objective)
        if abs(G.total_length - 1.0) > 1e-15:
            s = 1.0 / G.total_length
            G, Gd = G.scaled(s), Gd.scaled(s)
        x = G.lengths
        contracted = False
        last_move = None
        for it in range(max_iter):
            res = None
            for attempt in range(6):
                try:
                    res = objective.evaluate(G, Gd)
                    break
                except NotDifferentiableError:
                    if attempt == 5:
                        trace.status = "multiplicity"
                        raise NonConvergenceError("eigenvalue stays multiple after 5 jitters", trace)
                    x = x * (1.0 + 1e-9 * rng.standard_normal(x.size))
                    x = x / x.sum()
                    G, Gd = G.with_lengths(x), Gd.with_lengths(x)
                    events.append("jitter")
            grad = res.gradient
            tangent = grad - grad.mean()
            record = Iterate(restart, it, [e.id for e in G.edges], x.tolist(), res.ratio,
                             grad.tolist(), 0.0, events)
            events = []
            trace.iterates.append(record)
            if len(G.edges) == 1 or np.linalg.norm(tangent) < gtol * res.ratio:
                trace.status = "stationary"
                trace.final_graph = G
                return trace
            recent = [r.ratio for r in trace.iterates[-stall_window - 1:] if r.restart == restart]
            if len(recent) > stall_window and sign * (recent[-1] - recent[0]) <= stall_tol * abs(recent[-1]):
                # zigzag across a kink (multiple eigenvalue) without progress
                trace.status = "stalled"
                trace.final_graph = G
                return trace
            direction = sign * tangent
            t = 0.1 * math.sqrt(2.0) / np.linalg.norm(direction)
            if last_move is not None:
                # warm start from the previous step length (avoids long backtracks in zigzags)
                t = min(t, 4.0 * last_move / np.linalg.norm(direction))
            accepted = False
            for _ in range(60):
                if t * np.linalg.norm(direction) < 1e-13:
                    break  # steps below round-off of the lengths
                y = project_simplex(x + t * direction)
                short = [e.id for e, l in zip(G.edges, y) if l < eps_floor]
                if short:
                    trial = _contract_short(G, Gd, y, short)
                    val = objective.evaluate(trial[0], trial[1], grad=False)
                else:
                    val = objective.evaluate(G.with_lengths(y), Gd.with_lengths(y), grad=False)
                if sign * (val - res.ratio) >= 1e-4 * sign * float(grad @ (y - x)):
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                trace.status = "line-search"
                trace.final_graph = G
                return trace
            record.step = t
            if short:
                G, Gd = trial
                events.extend(f"contract:{eid}" for eid in short)
                contracted = True
                break
            last_move = float(np.linalg.norm(y - x))
            x = y
            G, Gd = G.with_lengths(x), Gd.with_lengths(x)
        if not contracted:
            trace.status = "max-iter"
            raise NonConvergenceError(f"no stationarity after {max_iter} iterations", trace)
        restart += 1
        if restart > max_restarts:
            trace.status = "max-restarts"
            raise NonConvergenceError(f"more than {max_restarts} restarts", trace)


# ---------------------------------------------------------------------------
# critical-point diagnostics

def _pendant_stars(G: MetricGraph, leaf) -> list[tuple]:
    """Vertices with >= 2 Dirichlet leaf edges and exactly one other edge."""
    out = []
    for v in G.vertices:
        inc = G.incident(v.id)
        legs = []
        other = []
        for e, end in inc:
            w = e.head if end == 0 else e.tail
            if w != leaf and G.degree(w) == 1 and G.condition(w).is_dirichlet:
                legs.append(e)
            else:
                other.append(e)
        if len(legs) >= 2 and len(other) == 1:
            out.append((v.id, legs))
    return out


def critical_point_diagnostics(G: MetricGraph, leaf, tol: float = 1e-6) -> dict:
    """Amplitude and frequency relations for ``lambda_1`` vs ``tau_1`` on a tree."""
    if not G.is_tree:
        raise GraphError("critical-point diagnostics need a tree")
    obj = VertexConditionRatio(leaf)
    Gl, Gt = obj.graphs(G)
    res = obj.evaluate(Gl, Gt)
    (psi,) = eigenfunctions(Gl, res.numerator)
    (phi,) = eigenfunctions(Gt, res.denominator)
    k_d, k_n = psi.k, phi.k
    edges = []
    for e in G.edges:
        cd, cn = psi.wave(e.id).amplitude, phi.wave(e.id).amplitude
        edges.append({"edge": e.id, "length": e.length, "c_D": cd, "c_N": cn, "residual": abs(cd - cn)})
    stars = []
    for vid, legs in _pendant_stars(G, leaf):
        ls = [e.length for e in legs]
        ell = float(np.mean(ls))
        stars.append({
            "center": vid,
            "leaf_lengths": ls,
            "length_spread": max(ls) - min(ls),
            "frequency_residual": abs(k_d + k_n - math.pi / ell),
            "amplitude_residual": max(abs(psi.wave(e.id).amplitude - phi.wave(e.id).amplitude) for e in legs),
        })
    return {
        "k_D": k_d,
        "k_N": k_n,
        "ratio": res.ratio,
        "balance_residual": res.balance_residual,
        "balanced": res.balance_residual < tol,
        "edges": edges,
        "pendant_stars": stars,
    }


def balancing_point(n: int, tip="D", lo: float = 0.02, hi: float = 0.98) -> MetricGraph:
    """The ``star_with_tail(n, l, 1 - n l)`` where the ratio gradient is balanced.

    Along this family the leg components of the gradient are equal, and by
    scale invariance they vanish together with the tail component.
    """
    def leg_component(s):
        ell = s / n
        G = star_with_tail(n, ell, 1.0 - s, tip=tip)
        return float(VertexConditionRatio("tip").evaluate(*VertexConditionRatio("tip").graphs(G)).gradient[0])

    ss = np.linspace(lo, hi, 25)
    vals = [leg_component(s) for s in ss]
    for a, b, fa, fb in zip(ss, ss[1:], vals, vals[1:]):
        if fa * fb < 0:
            s = brentq(leg_component, a, b, xtol=1e-14)
            return star_with_tail(n, s / n, 1.0 - s, tip=tip)
    raise ValueError("no balancing point on the symmetric family")
