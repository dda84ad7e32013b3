"""Eigenvalue inequalities, interlacing checks and counterexample sweeps.

Each inequality in a :class:`BoundReport` is an entry ``lhs <= rhs`` with
``margin = rhs - lhs``.  Lower bounds are stored the same way, with the
eigenvalue on the right.  Entries whose hypotheses fail on the given graph
are kept with ``applicable = False`` and the reason.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .families import balloon_bunch, big_star, equilateral_star, random_graph, random_tree
from .graph import DIRICHLET, KIRCHHOFF, GraphError, MetricGraph, graph_stats, insert_dummy
from .spectral import Spectrum, compute_spectrum

__all__ = [
    "REL_TOL",
    "BoundEntry",
    "BoundReport",
    "bound_report",
    "tau_ratio",
    "InterlacingResult",
    "interlacing_check",
    "SweepRow",
    "counterexample_sweep",
    "is_increasing",
    "Witness",
    "infimum_witness",
    "tree_ensemble",
    "general_ensemble",
    "ensemble_rows",
    "write_ensemble_csv",
]

REL_TOL = 1e-8
PI2 = math.pi**2

# one-line descriptions, used in reports and CLI output
DESCRIPTIONS = {
    "a": "lambda_{k+1}/lambda_k <= 5 on Dirichlet trees",
    "a1": "lambda_2/lambda_1 <= 2+sqrt(5) on Dirichlet trees",
    "b": "lambda_2/lambda_1 <= 4 on Dirichlet trees",
    "c": "lambda_{2k}/lambda_k <= 4 on Dirichlet trees",
    "d": "lambda_k/lambda_j <= 4^ceil(log2(k/j)) on Dirichlet trees",
    "d_weyl": "lambda_k/lambda_j <= 4k^2/j^2 on Dirichlet trees",
    "e": "lambda_k/lambda_j <= 4k^2/(j-N-beta)^2 for k > j >= N+beta+1",
    "f": "lambda_k >= pi^2 k^2/L^2 on Dirichlet trees",
    "g": "lambda_k >= (k-(N+beta)/2)^2 pi^2/L^2",
    "h": "lambda_k <= pi^2 (k-2+beta+D+(N+beta)/2)^2/L^2",
    "i": "nonzero eigenvalues >= pi^2/(4L^2)",
    "j": "lambda_k/lambda_j <= 4(k-2+beta+D+(N+beta)/2)^2",
    "vc": "lambda_1/tau_1 <= 4 on trees, one Dirichlet leaf made Neumann",
}


def _passes(lhs: float, rhs: float, tol: float = REL_TOL) -> bool:
    return rhs - lhs >= -tol * max(abs(lhs), abs(rhs), 1e-300)


@dataclass(frozen=True)
class BoundEntry:
    name: str
    indices: tuple
    applicable: bool
    lhs: float = math.nan
    rhs: float = math.nan
    reason: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return not self.applicable or _passes(self.lhs, self.rhs)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "indices": list(self.indices),
            "applicable": self.applicable,
            "reason": self.reason,
            "lhs": None if math.isnan(self.lhs) else self.lhs,
            "rhs": None if math.isnan(self.rhs) else self.rhs,
            "margin": None if math.isnan(self.margin) else self.margin,
            "pass": self.passed,
        }

    def describe(self) -> str:
        idx = ",".join(str(i) for i in self.indices)
        if not self.applicable:
            return f"({self.name})[{idx}] inapplicable: {self.reason}"
        verdict = "pass" if self.passed else "FAIL"
        return f"({self.name})[{idx}] {self.lhs:.12g} <= {self.rhs:.12g} margin {self.margin:.3g} {verdict}"


@dataclass
class BoundReport:
    fingerprint: str
    stats: dict
    k_max: int
    eigenvalues: list[float]
    entries: list[BoundEntry] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[BoundEntry]:
        return [e for e in self.entries if not e.passed]

    def applicable(self, name: str | None = None) -> list[BoundEntry]:
        return [e for e in self.entries if e.applicable and (name is None or e.name == name)]

    def by_name(self, name: str) -> list[BoundEntry]:
        return [e for e in self.entries if e.name == name]

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "stats": self.stats,
            "k_max": self.k_max,
            "eigenvalues": self.eigenvalues,
            "pass": self.passed,
            "entries": [e.to_dict() for e in self.entries],
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _ceil_log2_ratio(k: int, j: int) -> int:
    p = 0
    while j << p < k:
        p += 1
    return p


def _interior_dirichlet(G: MetricGraph) -> bool:
    return any(v.condition.is_dirichlet and G.degree(v.id) > 1 for v in G.vertices)


def _delta_vertices(G: MetricGraph) -> bool:
    return any(not v.condition.is_dirichlet and v.condition.strength != 0 for v in G.vertices)


def tau_ratio(G: MetricGraph, leaf, spectrum: Spectrum | None = None) -> float:
    """``lambda_1(G) / tau_1``, with ``leaf`` switched from Dirichlet to Neumann."""
    if not G.condition(leaf).is_dirichlet or G.degree(leaf) != 1:
        raise GraphError(f"{leaf!r} is not a Dirichlet leaf")
    lam1 = (spectrum or compute_spectrum(G, 1)).lam(1)
    tau1 = compute_spectrum(G.with_condition(leaf, KIRCHHOFF), 1).lam(1)
    return lam1 / tau1


def bound_report(G: MetricGraph, k_max: int, spectrum: Spectrum | None = None,
                 tau: bool = True) -> BoundReport:
    """Evaluate every inequality on ``G`` for indices up to ``k_max``.

    The spectrum is computed with ``2 * k_max`` eigenvalues so that the
    doubling bound can use ``lambda_{2k}`` for every ``k <= k_max``.  With
    ``tau`` the tree bound for a single Dirichlet-to-Neumann switch is checked
    at every Dirichlet leaf.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    count = 2 * k_max
    spec = spectrum if spectrum is not None else compute_spectrum(G, count)
    lam = spec.eigenvalues[:count]
    if lam.size < count:
        raise ValueError(f"spectrum has {lam.size} eigenvalues, need {count}")
    st = graph_stats(G)
    L, N, D, beta = st.total_length, st.neumann_leaves, st.dirichlet_leaves, st.betti
    dtree = G.is_dirichlet_tree()
    plain = not _delta_vertices(G)  # only Dirichlet and Kirchhoff conditions
    interior_d = _interior_dirichlet(G)
    has_d = G.has_dirichlet()
    entries: list[BoundEntry] = []
    ev = lambda k: float(lam[k - 1])

    # tree-only bounds
    if not G.is_tree:
        tree_reason = f"not a tree (beta={beta})"
    elif not dtree:
        tree_reason = "not a Dirichlet tree (a leaf is not Dirichlet or an interior vertex is not Kirchhoff)"
    else:
        tree_reason = ""

    def tree_entry(name, idx, lhs, rhs):
        if tree_reason:
            entries.append(BoundEntry(name, idx, False, reason=tree_reason))
        else:
            entries.append(BoundEntry(name, idx, True, lhs, rhs))

    for k in range(1, k_max):
        tree_entry("a", (k + 1, k), ev(k + 1) / ev(k) if not tree_reason else math.nan, 5.0)
    tree_entry("a1", (2, 1), ev(2) / ev(1) if not tree_reason else math.nan, 2.0 + math.sqrt(5.0))
    tree_entry("b", (2, 1), ev(2) / ev(1) if not tree_reason else math.nan, 4.0)
    for k in range(1, k_max + 1):
        tree_entry("c", (2 * k, k), ev(2 * k) / ev(k) if not tree_reason else math.nan, 4.0)
    for k in range(2, k_max + 1):
        for j in range(1, k):
            r = ev(k) / ev(j) if not tree_reason else math.nan
            tree_entry("d", (k, j), r, 4.0 ** _ceil_log2_ratio(k, j))
            tree_entry("d_weyl", (k, j), r, 4.0 * k * k / (j * j))
    for k in range(1, k_max + 1):
        tree_entry("f", (k,), PI2 * k * k / (L * L), ev(k))

    # general-graph bounds
    if not plain:
        gen_reason = "delta conditions with nonzero strength"
    elif interior_d:
        gen_reason = "Dirichlet condition at an interior vertex (graph is effectively disconnected)"
    else:
        gen_reason = ""
    shift = N + beta
    for k in range(2, k_max + 1):
        for j in range(1, k):
            idx = (k, j)
            if gen_reason:
                entries.append(BoundEntry("e", idx, False, reason=gen_reason))
            elif j < shift + 1:
                entries.append(BoundEntry("e", idx, False, reason=f"j={j} < N+beta+1={shift + 1}"))
            elif ev(j) <= 0:
                entries.append(BoundEntry("e", idx, False, reason=f"lambda_{j} = 0"))
            else:
                entries.append(BoundEntry("e", idx, True, ev(k) / ev(j), 4.0 * k * k / (j - shift) ** 2))

    # a cycle, possibly with dummy vertices: both bounds fail there
    cyc = beta == 1 and all(d == 2 for d in G.degrees().values())
    for k in range(1, k_max + 1):
        c = k - shift / 2.0
        if cyc:
            entries.append(BoundEntry("g", (k,), False, reason="graph is a single cycle"))
        elif gen_reason:
            entries.append(BoundEntry("g", (k,), False, reason=gen_reason))
        elif k < 2 and not has_d:
            entries.append(BoundEntry("g", (k,), False, reason="k=1 needs a Dirichlet vertex"))
        elif c <= 0:
            entries.append(BoundEntry("g", (k,), False, reason=f"k-(N+beta)/2 = {c:g} <= 0"))
        else:
            entries.append(BoundEntry("g", (k,), True, c * c * PI2 / (L * L), ev(k)))

    upper_reason = gen_reason or ("graph is a single cycle" if cyc else "")
    a_const = lambda k: k - 2 + beta + D + shift / 2.0
    for k in range(1, k_max + 1):
        if upper_reason:
            entries.append(BoundEntry("h", (k,), False, reason=upper_reason))
        else:
            entries.append(BoundEntry("h", (k,), True, ev(k), PI2 * a_const(k) ** 2 / (L * L)))

    nonzero = [k for k in range(1, count + 1) if ev(k) > 0]
    if not plain:
        entries.append(BoundEntry("i", (), False, reason=gen_reason))
    elif nonzero:
        k0 = nonzero[0]
        entries.append(BoundEntry("i", (k0,), True, PI2 / (4 * L * L), ev(k0)))

    for k in range(2, k_max + 1):
        for j in range(1, k):
            if upper_reason:
                entries.append(BoundEntry("j", (k, j), False, reason=upper_reason))
            elif ev(j) <= 0:
                entries.append(BoundEntry("j", (k, j), False, reason=f"lambda_{j} = 0"))
            else:
                entries.append(BoundEntry("j", (k, j), True, ev(k) / ev(j), 4.0 * a_const(k) ** 2))

    if tau:
        for v in G.vertices:
            if not (v.condition.is_dirichlet and G.degree(v.id) == 1):
                continue
            if not dtree:
                entries.append(BoundEntry("vc", (v.id,), False, reason=tree_reason or "not a Dirichlet tree"))
            else:
                entries.append(BoundEntry("vc", (v.id,), True, tau_ratio(G, v.id, spec), 4.0))

    notes = _notes(G, lam, k_max, dtree, shift)
    return BoundReport(G.fingerprint(), st.as_dict(), k_max, [float(x) for x in lam], entries, notes)


def _notes(G: MetricGraph, lam: np.ndarray, k_max: int, dtree: bool, shift: int) -> dict:
    """Report-only quantities; nothing here is asserted."""
    notes: dict = {}
    if dtree:
        best = max(
            ((j * j * lam[k - 1] / (k * k * lam[j - 1]), k, j) for k in range(2, k_max + 1) for j in range(1, k)),
            default=None,
        )
        if best:
            notes["max_scaled_ratio"] = {"value": float(best[0]), "k": best[1], "j": best[2]}
        L = G.total_length
        near = []
        for k in range(1, k_max + 1):
            q = G.lengths * k / L
            if np.all(np.abs(q - np.round(q)) < 1e-6):
                near.append(k)
        notes["polya_lengths_multiple_of_L_over_k"] = near
    if shift > 0 and lam[0] > 0:
        # pairs below the proven range, for information only
        notes["low_j_ratios"] = [
            {"k": k, "j": j, "ratio": float(lam[k - 1] / lam[j - 1])}
            for k in range(2, k_max + 1) for j in range(1, min(k, shift + 1))
            if lam[j - 1] > 0
        ]
    return notes


# ---------------------------------------------------------------------------
# interlacing

@dataclass
class InterlacingResult:
    vertices: list
    base: Spectrum  # conditions before adding Dirichlet
    dirichlet: Spectrum  # with the Dirichlet conditions
    shift: int
    lower_margins: list[float]  # lambda_k(G) - lambda_{k-shift}(G')
    upper_margins: list[float]  # lambda_k(G') - lambda_k(G)

    @property
    def passed(self) -> bool:
        b, d = self.base.eigenvalues, self.dirichlet.eigenvalues
        for k, m in enumerate(self.upper_margins, start=1):
            if m < -REL_TOL * max(abs(d[k - 1]), 1.0):
                return False
        for k, m in enumerate(self.lower_margins, start=self.shift + 1):
            if m < -REL_TOL * max(abs(b[k - 1]), 1.0):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "vertices": [str(v) for v in self.vertices],
            "shift": self.shift,
            "base": self.base.to_dict(),
            "dirichlet": self.dirichlet.to_dict(),
            "lower_margins": self.lower_margins,
            "upper_margins": self.upper_margins,
            "pass": self.passed,
        }


def interlacing_check(G: MetricGraph, vertices, k_max: int = 8) -> InterlacingResult:
    """Toggle ``vertices`` between Kirchhoff and Dirichlet and compare spectra.

    ``vertices`` is a vertex id, an ``(edge_id, x)`` point (a Kirchhoff vertex
    is inserted there first), or a list of these.  All of them must currently
    carry the same condition, either Kirchhoff or Dirichlet.  With ``s``
    toggled vertices the check is
    ``lambda_{k-s}(G') <= lambda_k(G) <= lambda_k(G')`` where ``G'`` carries
    the Dirichlet conditions.
    """
    if isinstance(vertices, (str, tuple)) or not isinstance(vertices, Iterable):
        vertices = [vertices]
    vids = []
    H = G
    for v in vertices:
        if isinstance(v, tuple):
            eid, x = v
            before = {u.id for u in H.vertices}
            H = insert_dummy(H, eid, float(x))
            (v,) = [u.id for u in H.vertices if u.id not in before]
        vids.append(v)
    if len(set(vids)) != len(vids):
        raise ValueError("vertices must be distinct")
    conds = {H.condition(v).is_dirichlet for v in vids}
    for v in vids:
        c = H.condition(v)
        if not (c.is_dirichlet or c.is_kirchhoff):
            raise ValueError(f"vertex {v!r} carries {c}; only Kirchhoff <-> Dirichlet toggles are supported")
    if len(conds) != 1:
        raise ValueError("all toggled vertices must carry the same condition")
    if conds == {True}:
        Gd = H
        Gk = H
        for v in vids:
            Gk = Gk.with_condition(v, KIRCHHOFF)
    else:
        Gk = H
        Gd = H
        for v in vids:
            Gd = Gd.with_condition(v, DIRICHLET)
    sk = compute_spectrum(Gk, k_max)
    sd = compute_spectrum(Gd, k_max)
    b, d = sk.eigenvalues, sd.eigenvalues
    s = len(vids)
    upper = [float(d[k - 1] - b[k - 1]) for k in range(1, k_max + 1)]
    lower = [float(b[k - 1] - d[k - s - 1]) for k in range(s + 1, k_max + 1)]
    return InterlacingResult(vids, sk, sd, s, lower, upper)


# ---------------------------------------------------------------------------
# counterexamples and witnesses

@dataclass(frozen=True)
class SweepRow:
    parameter: float
    lam1: float
    lam2: float
    ratio: float
    lam2_reference: float  # Dirichlet-Dirichlet value of the long edge, not asserted

    def to_dict(self) -> dict:
        return asdict(self)


def _sweep_graph(family: str, p, tail: float, eps: float, loop: float, tip) -> MetricGraph:
    if family in ("big_star", "bigstar"):
        return big_star(tail, int(p), eps, tip=tip or "K")
    return balloon_bunch(int(p), loop, tail, tip=tip or "D")


def _sweep_row(args) -> SweepRow:
    family, p, tail, eps, loop, tip = args
    spec = compute_spectrum(_sweep_graph(family, p, tail, eps, loop, tip), 2)
    l1, l2 = spec.lam(1), spec.lam(2)
    return SweepRow(float(p), l1, l2, l2 / l1, PI2 / tail**2)


def counterexample_sweep(family: str, grid: Sequence, tail: float = 1.0, eps: float = 0.01,
                         loop: float = 0.1, tip=None, mapper: Callable = map) -> list[SweepRow]:
    """``lambda_2/lambda_1`` along ``big_star`` (over m) or ``balloon_bunch`` (over beta)."""
    if family not in ("big_star", "bigstar", "balloon_bunch", "balloons"):
        raise ValueError(f"unknown counterexample family {family!r}; use big_star or balloon_bunch")
    return list(mapper(_sweep_row, [(family, p, tail, eps, loop, tip) for p in grid]))


def is_increasing(rows: Sequence[SweepRow]) -> bool:
    return all(b.ratio > a.ratio for a, b in zip(rows, rows[1:]))


@dataclass(frozen=True)
class Witness:
    graph: MetricGraph
    k: int
    j: int
    ratio: float


def infimum_witness(k: int, j: int, ell: float = 1.0) -> Witness:
    """Equilateral ``k``-star with ``lambda_k = lambda_j``; the center is Dirichlet when ``j = 1``."""
    if not (isinstance(k, int) and isinstance(j, int) and k > j >= 1):
        raise ValueError(f"need integers k > j >= 1, got k={k!r}, j={j!r}")
    G = equilateral_star(k, ell, leaf="D", center="D" if j == 1 else "K")
    spec = compute_spectrum(G, k)
    return Witness(G, k, j, spec.lam(k) / spec.lam(j))


# ---------------------------------------------------------------------------
# ensembles

def tree_ensemble(seed: int) -> MetricGraph:
    """Random Dirichlet tree, at most 8 edges, lengths log-uniform in [0.1, 2]."""
    return random_tree(seed, max_edges=8, length_range=(0.1, 2.0), leaf="D")


def general_ensemble(seed: int) -> MetricGraph:
    """Random graph with ``beta = seed % 3`` extra edges and up to ``(seed // 3) % 3`` Neumann leaves."""
    return random_graph(seed, max_edges=8, beta=seed % 3, neumann=(seed // 3) % 3)


def _ensemble_one(args) -> list[dict]:
    seed, k_max, builder = args
    rep = bound_report(builder(seed), k_max)
    return [
        {"seed": seed, "inequality": e.name, "indices": ":".join(str(i) for i in e.indices),
         "lhs": e.lhs, "rhs": e.rhs, "margin": e.margin, "pass": e.passed}
        for e in rep.entries if e.applicable
    ]


def ensemble_rows(seeds: Iterable[int], k_max: int = 8, builder: Callable = tree_ensemble,
                  mapper: Callable = map) -> list[dict]:
    """Flattened rows ``(seed, inequality, indices, lhs, rhs, margin, pass)`` of applicable entries.

    ``builder`` must be a module-level function when ``mapper`` runs in other processes.
    """
    out = []
    for rows in mapper(_ensemble_one, [(s, k_max, builder) for s in seeds]):
        out.extend(rows)
    return out


def write_ensemble_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "inequality", "indices", "lhs", "rhs", "margin", "pass"])
        for r in rows:
            w.writerow([r["seed"], r["inequality"], r["indices"], f"{r['lhs']:.12g}",
                        f"{r['rhs']:.12g}", f"{r['margin']:.12g}", int(r["pass"])])
