"""Laplacian eigenvalues and eigenfunctions on metric graphs.

On every edge an eigenfunction at frequency ``k`` has the form
``A cos(kx) + B sin(kx)``.  The vertex conditions give a square linear system
in the edge coefficients (the secular matrix); eigenfrequencies are the ``k``
at which it is singular.  Roots are located by scanning the smallest singular
value, refined, and checked against a finite-element eigenvalue count.

Internally the second basis function is ``sin(kx)/min(k, 1)`` so the system
stays well conditioned as ``k -> 0`` (where it becomes ``x``).
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .graph import GraphError, MetricGraph, split_loops

log = logging.getLogger(__name__)

__all__ = [
    "SpectrumError",
    "EigenfunctionError",
    "NonGenericError",
    "Wave",
    "Spectrum",
    "Eigenfunction",
    "secular_matrix",
    "compute_spectrum",
    "eigenvalues",
    "eigenfunction",
    "eigenfunctions",
    "nodal_count",
]

MULT_RTOL = 1e-8  # singular values below MULT_RTOL * median count toward multiplicity
CLUSTER_KTOL = 1e-9  # frequencies closer than this are one eigenvalue


class SpectrumError(RuntimeError):
    """Root finding failed; ``interval`` holds the suspect frequency range."""

    def __init__(self, message: str, interval: tuple[float, float] | None = None):
        super().__init__(message)
        self.interval = interval


class EigenfunctionError(ValueError):
    """The requested value is not an eigenvalue (``sigma`` is the residual)."""

    def __init__(self, message: str, sigma: float):
        super().__init__(message)
        self.sigma = sigma


class NonGenericError(ValueError):
    """An eigenfunction vanishes at a vertex or on a whole edge."""


# ---------------------------------------------------------------------------
# secular matrix

class _Assembly:
    """Row templates for one (loop-free) graph, evaluated for many ``k`` at once."""

    def __init__(self, H: MetricGraph):
        if any(e.is_loop for e in H.edges):
            raise GraphError("loops must be split before assembly")
        self.graph = H
        self.m = len(H.edges)
        self.lengths = H.lengths
        pos = {e.id: i for i, e in enumerate(H.edges)}
        # each row: (kind, [(edge index, end, weight)], alpha)
        #   kind "val":  sum of weight * value-at-end
        #   kind "flux": sum of inward derivatives + alpha * value at first end
        rows = []
        for v in H.vertices:
            ends = [(pos[e.id], end) for e, end in H.incident(v.id)]
            if not ends:
                continue
            if v.condition.is_dirichlet:
                rows.extend(("val", [(i, end, 1.0)], 0.0) for i, end in ends)
                continue
            i0, end0 = ends[0]
            for i, end in ends[1:]:
                rows.append(("val", [(i, end, 1.0), (i0, end0, -1.0)], 0.0))
            rows.append(("flux", ends, v.condition.strength))
        assert len(rows) == 2 * self.m
        self.rows = rows
        # flatten into terms: coefficient of basis column ``col`` of edge ``i``,
        # either a value (typ 0) or an inward derivative (typ 1) at ``end``
        n = 2 * self.m
        terms = []  # (flat index, typ, end, col, edge, weight, scaled)
        for r, (kind, ts, alpha) in enumerate(rows):
            if kind == "val":
                for i, end, w in ts:
                    terms += [(r * n + 2 * i + col, 0, end, col, i, w, False) for col in (0, 1)]
            else:
                for i, end in ts:
                    terms += [(r * n + 2 * i + col, 1, end, col, i, 1.0, True) for col in (0, 1)]
                if alpha:
                    i0, end0 = ts[0]
                    terms += [(r * n + 2 * i0 + col, 0, end0, col, i0, alpha, True) for col in (0, 1)]
        t = np.array(terms, dtype=float)
        self._flat = t[:, 0].astype(int)
        self._typ = t[:, 1].astype(int)
        self._end = t[:, 2].astype(int)
        self._col = t[:, 3].astype(int)
        self._edge = t[:, 4].astype(int)
        self._weight = t[:, 5]
        self._scaled = t[:, 6].astype(bool)
        scatter = np.zeros((len(terms), n * n))
        scatter[np.arange(len(terms)), self._flat] = 1.0
        self._scatter = scatter

    def matrices(self, ks: np.ndarray) -> np.ndarray:
        ks = np.atleast_1d(np.asarray(ks, dtype=float))
        nk, m = ks.size, self.m
        kk = ks[:, None]
        ell = self.lengths[None, :]
        c = np.cos(kk * ell)
        # sin(k l)/rho with rho = min(k, 1), finite at k = 0
        s_rho = np.where(kk < 1.0, ell * np.sinc(kk * ell / np.pi), np.sin(kk * ell))
        k_rho = np.broadcast_to(np.where(kk < 1.0, 1.0, kk), c.shape)  # k / rho
        basis = np.zeros((nk, 2, 2, 2, m))  # (k, typ, end, col, edge)
        basis[:, 0, 0, 0] = 1.0
        basis[:, 0, 1, 0] = c
        basis[:, 0, 1, 1] = s_rho
        basis[:, 1, 0, 1] = -k_rho
        basis[:, 1, 1, 0] = -kk * np.sin(kk * ell)
        basis[:, 1, 1, 1] = k_rho * c
        vals = basis[:, self._typ, self._end, self._col, self._edge] * self._weight
        scale = 1.0 / np.maximum(1.0, ks)
        vals[:, self._scaled] *= scale[:, None]
        n = 2 * m
        return (vals @ self._scatter).reshape(nk, n, n)

    def singular_values(self, ks) -> np.ndarray:
        """Singular values, ascending, shape (len(ks), 2m)."""
        sv = np.linalg.svd(self.matrices(ks), compute_uv=False)
        return sv[:, ::-1]

    def signed_sigma(self, k: float) -> float:
        M = self.matrices(np.array([k]))[0]
        sign, _ = np.linalg.slogdet(M)
        sv = np.linalg.svd(M, compute_uv=False)
        return float(sign * sv[-1])

    def signed(self, ks) -> tuple[np.ndarray, np.ndarray]:
        M = self.matrices(ks)
        sign, _ = np.linalg.slogdet(M)
        sv = np.linalg.svd(M, compute_uv=False)[:, ::-1]
        return sign, sv


def secular_matrix(G: MetricGraph, k: float) -> np.ndarray:
    """The 2m x 2m vertex-condition matrix at frequency ``k > 0``.

    Columns are ``(A_e, B_e)`` per edge of ``split_loops(G)`` in the basis
    ``cos(kx), sin(kx)/min(k, 1)``; flux rows are scaled by ``1/max(1, k)``.
    """
    if not k > 0:
        raise ValueError(f"frequency must be positive, got {k!r}")
    H, _ = split_loops(G)
    return _Assembly(H).matrices(np.array([float(k)]))[0]


# ---------------------------------------------------------------------------
# spectrum

@dataclass(frozen=True)
class Spectrum:
    """Distinct eigenvalues with multiplicities, in increasing order."""

    values: tuple[float, ...]
    multiplicities: tuple[int, ...]
    fingerprint: str = ""

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(np.array(self.values, dtype=float), self.multiplicities)

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.eigenvalues, 0.0))

    def __len__(self) -> int:
        return int(sum(self.multiplicities))

    def lam(self, k: int) -> float:
        """The k-th eigenvalue, counted from 1 with multiplicity."""
        ev = self.eigenvalues
        if not 1 <= k <= ev.size:
            raise IndexError(f"eigenvalue index {k} outside 1..{ev.size}")
        return float(ev[k - 1])

    def multiplicity_of(self, k: int) -> int:
        total = 0
        for mult in self.multiplicities:
            total += mult
            if k <= total:
                return mult
        raise IndexError(k)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "distinct": [
                {"lambda": float(v), "k": math.sqrt(max(v, 0.0)), "multiplicity": int(m)}
                for v, m in zip(self.values, self.multiplicities)
            ],
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Spectrum":
        d = data["distinct"]
        return cls(
            tuple(float(x["lambda"]) for x in d),
            tuple(int(x["multiplicity"]) for x in d),
            data.get("fingerprint", ""),
        )


def _has_zero_mode(G: MetricGraph) -> bool:
    return all(v.condition.is_kirchhoff for v in G.vertices)


def compute_spectrum(
    G: MetricGraph,
    count: int,
    scan_step: float | None = None,
    tol: float = 1e-12,
    verify: bool = True,
    mapper: Callable = map,
) -> Spectrum:
    """The first ``count`` eigenvalues of the Laplacian on ``G``.

    The last returned cluster is kept whole, so ``len(result)`` may exceed
    ``count`` when it is degenerate.  With ``verify`` the number of roots found
    below a threshold is checked against a finite-element count; a mismatch
    triggers a rescan at half the step, up to three times.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if any(v.condition.kind == "delta" and v.condition.strength < 0 for v in G.vertices):
        raise NotImplementedError("negative delta strengths (negative eigenvalues) are not supported")
    H, _ = split_loops(G)
    asm = _Assembly(H)
    L = H.total_length
    step = scan_step if scan_step is not None else math.pi / (4.0 * L)
    zero = _has_zero_mode(G)
    need = count - (1 if zero else 0)
    for attempt in range(4):
        roots = _scan(asm, need, step, tol, zero, extra=verify, mapper=mapper)
        if not verify or need <= 0:
            break
        ok, detail = _verify_count(H, roots, need, zero)
        if ok:
            break
        log.info("root count mismatch (%s); rescanning with step %g", detail, step / 2)
        step /= 2.0
    else:
        raise SpectrumError(
            f"secular roots disagree with the finite-element count after 3 rescans: {detail['message']}",
            interval=detail["interval"],
        )
    vals, mults = [], []
    if zero:
        vals.append(0.0)
        mults.append(1)
    total = sum(mults)
    for k, mult in roots:
        if total >= count:
            break
        vals.append(k * k)
        mults.append(mult)
        total += mult
    return Spectrum(tuple(vals), tuple(mults), G.fingerprint())


def eigenvalues(G: MetricGraph, count: int, **kw) -> np.ndarray:
    """Shorthand: the first ``count`` eigenvalues as a flat array."""
    return compute_spectrum(G, count, **kw).eigenvalues[:count]


def _scan(asm: _Assembly, need: int, step: float, tol: float, zero: bool,
          extra: bool, mapper: Callable) -> list[tuple[float, int]]:
    """Roots ``(k, multiplicity)`` in increasing order until ``need`` are found.

    With ``extra`` one further distinct root is included so a counting
    threshold can be placed in the gap after the last requested one.
    """
    found: list[tuple[float, int]] = []
    chunk = 48
    start = 0
    k_prev = None  # (ks, sign, sv) of last two points of the previous chunk
    hi_needed = None
    max_k = 1e6
    while True:
        idx = np.arange(start, start + chunk)
        ks = idx * step
        sign, sv = asm.signed(ks)
        if k_prev is not None:
            ks = np.concatenate([k_prev[0], ks])
            sign = np.concatenate([k_prev[1], sign])
            sv = np.concatenate([k_prev[2], sv])
        brackets = _candidates(ks, sign, sv[:, 0], skip_origin=zero and start == 0)
        results = list(mapper(lambda br: _refine(asm, br, tol), brackets))
        new = sorted({r for res in results for r in res})
        found = _merge_roots(found + new)
        total = sum(mult for _, mult in found)
        if total >= need and hi_needed is None:
            if not extra:
                hi_needed = ks[-1]
            else:
                hi_needed = -1.0
        if hi_needed is not None:
            if not extra:
                break
            # distinct roots strictly after the cluster holding the need-th root
            acc, last = 0, None
            for i, (k, mult) in enumerate(found):
                acc += mult
                if acc >= need:
                    last = i
                    break
            if last is not None and len(found) > last + 1:
                break
        k_prev = (ks[-2:], sign[-2:], sv[-2:])
        start += chunk
        if ks[-1] > max_k:
            raise SpectrumError("no convergence of the frequency scan", (0.0, float(ks[-1])))
    return found


def _candidates(ks, sign, s1, skip_origin: bool) -> list[tuple[float, float, str]]:
    n = ks.size
    out = []
    lo = 1 if skip_origin else 0
    signed = sign * s1
    for i in range(lo, n - 1):
        if signed[i] == 0.0:
            out.append((ks[max(i - 1, lo)], ks[i + 1], "min"))
        elif signed[i] * signed[i + 1] < 0:
            out.append((ks[i], ks[i + 1], "sign"))
    for i in range(max(lo, 1), n - 1):
        if s1[i] <= s1[i - 1] and s1[i] < s1[i + 1]:
            left_change = signed[i - 1] * signed[i] < 0
            right_change = signed[i] * signed[i + 1] < 0
            if not (left_change or right_change):
                out.append((ks[i - 1], ks[i + 1], "min"))
    return out


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Golden-section minimization of a unimodal ``f`` on [a, b] down to width ``tol``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        if c >= d:  # interval below floating-point resolution
            break
    return c if fc <= fd else d


def _accept(sv: np.ndarray) -> int:
    """Multiplicity implied by a sorted singular-value vector (0 = not a root)."""
    med = float(np.median(sv))
    return int(np.sum(sv < MULT_RTOL * max(med, 1e-300)))


ZOOM_RTOL = 0.05  # a further singular value this small hints at a nearby root


def _refine(asm: _Assembly, bracket, tol: float, depth: int = 0) -> list[tuple[float, int]]:
    a, b, kind = bracket
    if kind == "sign":
        k = brentq(asm.signed_sigma, a, b, xtol=min(tol, 1e-14), rtol=4 * np.finfo(float).eps,
                   maxiter=200)
    else:
        k = _golden(lambda x: asm.singular_values([x])[0, 0], a, b, tol)
    sv = asm.singular_values([k])[0]
    med = float(np.median(sv))
    mult = _accept(sv)
    roots = []
    if mult and k > 0:
        roots = [(float(k), mult)]
        roots += _probe_neighbours(asm, k, mult, sv, a, b, tol)
    # roots closer together than the grid: zoom in on the bracket
    suspicious = sv[min(mult, sv.size - 1)] < ZOOM_RTOL * med
    if suspicious and depth < 6 and b - a > 1e-7 * max(1.0, b):
        # the neighbour may sit just across a bracket end, so widen first
        w = b - a
        a, b = max(k - w, 0.0), k + w
        ks = np.linspace(a, b, 33)
        sign, fine = asm.signed(ks)
        for br in _candidates(ks, sign, fine[:, 0], skip_origin=a == 0.0):
            roots += _refine(asm, br, tol, depth + 1)
        roots = _merge_roots(roots)
    return roots


def _probe_neighbours(asm, k, mult, sv, a, b, tol) -> list[tuple[float, int]]:
    """Find further odd-multiplicity roots hiding in ``[a, b]`` next to ``k``.

    The sign of ``det`` flips at every odd root, so dividing out the roots
    already found exposes the remaining ones as sign changes.
    """
    found = [(k, mult)]
    out = []
    for _ in range(8):
        def deflated(x, roots=tuple(found)):
            val = asm.signed_sigma(x)
            for r, mu in roots:
                val /= (x - r) ** mu
            return val

        cuts = sorted(r for r, _ in found)
        delta = 1e-8 * max(1.0, k)
        pieces = []
        lo = a
        for r in cuts:
            pieces.append((lo, r - delta))
            lo = r + delta
        pieces.append((lo, b))
        new = None
        for lo, hi in pieces:
            if hi - lo <= 2 * delta:
                continue
            if deflated(lo) * deflated(hi) < 0:
                r = brentq(deflated, lo, hi, xtol=min(tol, 1e-14), maxiter=200)
                m2 = _accept(asm.singular_values([r])[0])
                if m2:
                    new = (float(r), m2)
                    break
        if new is None:
            break
        found.append(new)
        out.append(new)
    return out


def _merge_roots(roots: list[tuple[float, int]]) -> list[tuple[float, int]]:
    roots = sorted(roots)
    out: list[tuple[float, int]] = []
    for k, mult in roots:
        if out and abs(k - out[-1][0]) < CLUSTER_KTOL * max(1.0, k):
            if mult > out[-1][1]:
                out[-1] = (k, mult)
            continue
        out.append((k, mult))
    return out


def _verify_count(H: MetricGraph, roots, need: int, zero: bool):
    """Compare the number of roots below a gap threshold with a FEM count."""
    from .fem import fem_count_below

    acc, last = 0, None
    for i, (k, mult) in enumerate(roots):
        acc += mult
        if acc >= need:
            last = i
            break
    k_last, k_next = roots[last][0], roots[last + 1][0]
    threshold = 0.5 * (k_last + k_next)
    found = acc + (1 if zero else 0)
    # P1 elements overestimate lambda by about (k h)^2 / 12; keep a 4x margin
    gap = threshold**2 / k_last**2 - 1.0
    h = math.sqrt(3.0 * gap) / k_last
    h = min(h, 0.45 * min(e.length for e in H.edges))
    h = max(h, H.total_length / 6000.0)
    fem = None
    for _ in range(3):
        try:
            fem = fem_count_below(H, threshold**2, h)
        except ValueError as exc:
            # an edge far below L/6000 cannot be meshed at affordable size
            log.debug("count check skipped: %s", exc)
            return True, {}
        if fem == found:
            return True, {}
        if fem > found:
            break  # the FEM count is a lower bound, so a root was missed
        h /= 2.0
        if H.total_length / h > 12000:
            # the gap is below FEM resolution; a smaller count contradicts nothing
            log.debug("FEM count %d < %d below k=%g at finest mesh; accepting", fem, found, threshold)
            return True, {}
    else:
        return True, {}
    return False, {
        "message": f"{found} roots below k={threshold:.6g}, FEM counts {fem}",
        "interval": (0.0, float(threshold)),
    }


# ---------------------------------------------------------------------------
# eigenfunctions

@dataclass(frozen=True)
class Wave:
    """Edge restriction ``A cos(kx) + B sin(kx)``, x measured from the tail."""

    edge: Hashable
    A: float
    B: float

    @property
    def amplitude(self) -> float:
        return math.hypot(self.A, self.B)


def _edge_gram(k: float, ell: float) -> np.ndarray:
    """Integrals of products of (cos kx, sin kx) over [0, ell]."""
    if k == 0.0:
        return np.array([[ell, 0.0], [0.0, 0.0]])
    s2 = math.sin(2 * k * ell) / (4 * k)
    cs = (1.0 - math.cos(2 * k * ell)) / (4 * k)
    return np.array([[ell / 2 + s2, cs], [cs, ell / 2 - s2]])


@dataclass(frozen=True)
class Eigenfunction:
    graph: MetricGraph
    lam: float
    waves: tuple[Wave, ...]
    normalized: bool = True
    sign_convention: str = "positive-if-definite-else-largest-coefficient-positive"
    _by_edge: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_edge", {w.edge: w for w in self.waves})

    @property
    def k(self) -> float:
        return math.sqrt(max(self.lam, 0.0))

    def wave(self, edge) -> Wave:
        return self._by_edge[edge]

    def value(self, edge, x):
        w = self._by_edge[edge]
        kx = self.k * np.asarray(x, dtype=float)
        return w.A * np.cos(kx) + w.B * np.sin(kx)

    def derivative(self, edge, x):
        w = self._by_edge[edge]
        k = self.k
        kx = k * np.asarray(x, dtype=float)
        return k * (-w.A * np.sin(kx) + w.B * np.cos(kx))

    def norm(self) -> float:
        total = 0.0
        for e in self.graph.edges:
            w = self._by_edge[e.id]
            c = np.array([w.A, w.B])
            total += float(c @ _edge_gram(self.k, e.length) @ c)
        return math.sqrt(total)

    def vertex_value(self, vid) -> float:
        e, end = self.graph.incident(vid)[0]
        return float(self.value(e.id, 0.0 if end == 0 else e.length))

    def vertex_residuals(self) -> dict:
        """Max continuity mismatch, flux residual and Dirichlet value over vertices."""
        cont = flux = dval = 0.0
        for v in self.graph.vertices:
            ends = self.graph.incident(v.id)
            vals = [float(self.value(e.id, 0.0 if end == 0 else e.length)) for e, end in ends]
            if v.condition.is_dirichlet:
                dval = max(dval, max(abs(x) for x in vals))
                continue
            cont = max(cont, max(abs(x - vals[0]) for x in vals))
            inward = [
                -float(self.derivative(e.id, 0.0)) if end == 0 else float(self.derivative(e.id, e.length))
                for e, end in ends
            ]
            flux = max(flux, abs(sum(inward) + v.condition.strength * vals[0]))
        return {"continuity": cont, "flux": flux, "dirichlet": dval}

    def sample(self, resolution: int = 64) -> list[tuple]:
        rows = []
        for e in self.graph.edges:
            xs = np.linspace(0.0, e.length, resolution + 1)
            for x, y in zip(xs, self.value(e.id, xs)):
                rows.append((e.id, float(x), float(y)))
        return rows

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "k": self.k,
            "normalized": self.normalized,
            "sign_convention": self.sign_convention,
            "waves": [{"edge": w.edge, "A": w.A, "B": w.B} for w in self.waves],
        }

    def write_csv(self, path, resolution: int = 64) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["edge", "x", "psi"])
            for eid, x, y in self.sample(resolution):
                out.writerow([eid, f"{x:.12g}", f"{y:.12g}"])


def eigenfunctions(G: MetricGraph, lam: float, rtol: float = 1e-6) -> list[Eigenfunction]:
    """An L2-orthonormal basis of the eigenspace of ``lam``.

    ``lam`` may be slightly off (e.g. rounded); it is polished to the nearest
    singular point within a relative ``1e-6`` window first.
    """
    H, origin = split_loops(G)
    asm = _Assembly(H)
    k = math.sqrt(max(lam, 0.0))
    sv = asm.singular_values([k])[0]
    if _accept(sv) == 0 and k > 0:
        delta = 1e-6 * max(1.0, k)
        k2 = _golden(lambda x: asm.singular_values([x])[0, 0], max(k - delta, 0.0), k + delta,
                     1e-15 * max(1.0, k))
        sv2 = asm.singular_values([k2])[0]
        if _accept(sv2) > 0 and sv2[0] / max(np.median(sv2), 1e-300) < rtol:
            k, sv = k2, sv2
    mult = _accept(sv)
    if mult == 0:
        raise EigenfunctionError(
            f"lambda={lam!r} is not an eigenvalue (sigma_min={sv[0]:.3e})", float(sv[0])
        )
    M = asm.matrices(np.array([k]))[0]
    _, _, vt = np.linalg.svd(M)
    null = vt[-mult:][::-1].T  # columns: coefficient vectors, smallest sigma first
    rho = min(k, 1.0) if k > 0 else 1.0
    coeffs = null.copy()
    coeffs[1::2, :] /= rho  # back to the (cos, sin) basis
    if k == 0.0:
        coeffs[1::2, :] = 0.0
    gram = np.zeros((mult, mult))
    for i, e in enumerate(H.edges):
        W = _edge_gram(k, e.length)
        block = coeffs[2 * i:2 * i + 2, :]
        gram += block.T @ W @ block
    R = np.linalg.cholesky(gram).T  # gram = R^T R
    coeffs = coeffs @ np.linalg.inv(R)
    lam_out = k * k
    out = []
    first_half = {orig: i for i, e in enumerate(H.edges)
                  for orig, off in [origin[e.id]] if off == 0.0}
    for j in range(mult):
        waves = []
        for e in G.edges:
            i = first_half[e.id]
            waves.append(Wave(e.id, float(coeffs[2 * i, j]), float(coeffs[2 * i + 1, j])))
        ef = Eigenfunction(G, lam_out, tuple(waves))
        out.append(_fix_sign(ef))
    return out


def eigenfunction(G: MetricGraph, lam: float, index: int = 0) -> Eigenfunction:
    basis = eigenfunctions(G, lam)
    if not 0 <= index < len(basis):
        raise IndexError(f"eigenspace has dimension {len(basis)}, index {index} requested")
    return basis[index]


def _fix_sign(ef: Eigenfunction) -> Eigenfunction:
    samples = np.concatenate([ef.value(e.id, np.linspace(0, e.length, 33)) for e in ef.graph.edges])
    scale = float(np.max(np.abs(samples))) or 1.0
    if np.all(samples >= -1e-9 * scale):
        flip = False
    elif np.all(samples <= 1e-9 * scale):
        flip = True
    else:
        coefs = [c for w in ef.waves for c in (w.A, w.B)]
        flip = coefs[int(np.argmax(np.abs(coefs)))] < 0
    if not flip:
        return ef
    waves = tuple(Wave(w.edge, -w.A, -w.B) for w in ef.waves)
    return Eigenfunction(ef.graph, ef.lam, waves, ef.normalized, ef.sign_convention)


# ---------------------------------------------------------------------------
# nodal domains

def nodal_count(ef: Eigenfunction, vertex_rtol: float = 1e-8) -> int:
    """Number of connected components of ``{psi != 0}``.

    Raises :class:`NonGenericError` if the eigenfunction vanishes at a
    non-Dirichlet vertex or identically on an edge.
    """
    G = ef.graph
    k = ef.k
    amp = max(w.amplitude for w in ef.waves)
    if amp == 0.0:
        raise NonGenericError("zero eigenfunction")
    for w in ef.waves:
        if w.amplitude < vertex_rtol * amp:
            raise NonGenericError(f"eigenfunction vanishes identically on edge {w.edge!r}")
    for v in G.vertices:
        if not v.condition.is_dirichlet and abs(ef.vertex_value(v.id)) < vertex_rtol * amp:
            raise NonGenericError(f"eigenfunction vanishes at vertex {v.id!r}; jitter the lengths")

    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    last_segment = {}
    for e in G.edges:
        w = ef.wave(e.id)
        zeros = _interior_zeros(w, k, e.length, vertex_rtol * amp)
        last_segment[e.id] = len(zeros)
        for s in range(len(zeros) + 1):
            find((e.id, s))
    for v in G.vertices:
        if v.condition.is_dirichlet:
            continue
        segs = [(e.id, 0) if end == 0 else (e.id, last_segment[e.id]) for e, end in G.incident(v.id)]
        for s in segs[1:]:
            union(segs[0], s)
    return len({find(x) for x in list(parent)})


def _interior_zeros(w: Wave, k: float, ell: float, atol: float) -> list[float]:
    if k == 0.0:
        return []
    # A cos(kx) + B sin(kx) = R sin(kx + phi)
    phi = math.atan2(w.A, w.B)
    j_lo = math.ceil(phi / math.pi)
    j_hi = math.floor((k * ell + phi) / math.pi)
    zeros = []
    for j in range(j_lo, j_hi + 1):
        x = (j * math.pi - phi) / k
        # zeros at an endpoint belong to the (Dirichlet) vertex
        if x * k * w.amplitude <= atol or (ell - x) * k * w.amplitude <= atol:
            continue
        if 0.0 < x < ell:
            zeros.append(x)
    return zeros
