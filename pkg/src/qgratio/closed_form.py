"""Transcendental solvers for Robin intervals and one-Robin-leaf stars.

Conventions: ``arccot`` takes values in (0, pi).  The Robin condition at a
free end is ``d psi/d nu + alpha psi = 0`` with the outward derivative, so
larger ``alpha`` pushes the frequency up towards the Dirichlet value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "InfeasibleError",
    "arccot",
    "robin_interval_k",
    "robin_interval_lambda",
    "matched_interval_length",
    "robin_star_k",
    "robin_star_alpha",
    "star_secular",
    "LemmaComparison",
    "lemma_comparison",
    "lemma_sweep",
    "appendix_f",
    "theta_phase",
]


class InfeasibleError(ValueError):
    pass


def arccot(y):
    """Inverse cotangent on the (0, pi) branch; ``arccot(-y) = pi - arccot(y)``."""
    return np.pi / 2 - np.arctan(y)


def _newton_polish(f, df, x, lo, hi):
    """One guarded Newton step: kept only if it stays in [lo, hi] and shrinks |f|."""
    fx = f(x)
    d = df(x)
    if d == 0 or not math.isfinite(d):
        return x
    y = x - fx / d
    if lo <= y <= hi and abs(f(y)) < abs(fx):
        return y
    return x


def robin_interval_k(L: float, alpha: float = 0.0, dirichlet: bool = False) -> float:
    """First frequency of [0, L]: Dirichlet at 0, Robin ``alpha`` (or Dirichlet) at L.

    Solves ``k cos(kL) + alpha sin(kL) = 0`` on (0, pi/L].  No positive root
    exists for ``alpha <= -1/L`` (the first eigenvalue is then <= 0); use
    :func:`robin_interval_lambda` there.
    """
    if not L > 0:
        raise ValueError(f"length must be positive, got {L!r}")
    if dirichlet or alpha == math.inf:
        return math.pi / L
    if not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha!r}")
    if 1.0 + alpha * L <= 0.0:
        raise InfeasibleError(f"alpha={alpha:g} <= -1/L: first eigenvalue is not positive")
    if alpha == 0.0:
        return math.pi / (2 * L)

    # cos(kL) + alpha sin(kL)/k, finite at k = 0 where it equals 1 + alpha L
    def g(k):
        return math.cos(k * L) + alpha * L * float(np.sinc(k * L / math.pi))

    def dg(k):
        return -L * math.sin(k * L) + alpha * (k * L * math.cos(k * L) - math.sin(k * L)) / (k * k)

    hi = math.pi / L
    k = brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return _newton_polish(g, dg, k, 0.0, hi)


def robin_interval_lambda(L: float, alpha: float) -> float:
    """First eigenvalue of the Robin interval, allowing ``lambda <= 0``."""
    if 1.0 + alpha * L > 0.0:
        return robin_interval_k(L, alpha) ** 2
    if 1.0 + alpha * L == 0.0:
        return 0.0
    # psi = sinh(kappa x): kappa cosh(kappa L) + alpha sinh(kappa L) = 0
    h = lambda kap: kap / math.tanh(kap * L) + alpha
    hi = 1.0
    while h(hi) <= 0:
        hi *= 2.0
    kap = brentq(h, 1e-300, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return -kap * kap


def matched_interval_length(alpha: float, k: float) -> float:
    """The length ``L`` with ``robin_interval_k(L, alpha) == k``."""
    if not k > 0:
        raise ValueError(f"frequency must be positive, got {k!r}")
    return float((math.pi - arccot(alpha / k)) / k)


def _u(k: float, x: float, alpha: float) -> tuple[float, float]:
    """Value and x-derivative of the Robin-end solution at distance ``x`` from the end."""
    if alpha == math.inf:
        sx = x * float(np.sinc(k * x / math.pi))
        return sx, math.cos(k * x)
    sx = x * float(np.sinc(k * x / math.pi))  # sin(kx)/k
    return math.cos(k * x) + alpha * sx, -k * math.sin(k * x) + alpha * math.cos(k * x)


def star_secular(k: float, n: int, ell: float, r: float, alpha: float) -> float:
    """Pole-free form of ``n cot(k ell) + cot(k r + theta) = 0``.

    ``n cos(k ell) u(r) + sin(k ell)/k u'(r)`` where ``u`` solves the Robin
    problem from the free end of the r-edge.
    """
    u, du = _u(k, r, alpha)
    s_ell = ell * float(np.sinc(k * ell / math.pi))
    return n * math.cos(k * ell) * u + s_ell * du


def _check_star(n, ell, r, allow_single):
    if int(n) != n or n < (1 if allow_single else 2):
        raise ValueError(f"need n >= 2 legs (n=1 only with allow_single), got {n!r}")
    if not (ell > 0 and r > 0):
        raise ValueError("leg and Robin-edge lengths must be positive")


def robin_star_k(n: int, ell: float, r: float, alpha: float, allow_single: bool = False) -> float:
    """First frequency of the star with ``n`` Dirichlet legs and one Robin edge.

    ``alpha = inf`` puts a Dirichlet condition at the end of the r-edge.
    """
    _check_star(n, ell, r, allow_single)
    if alpha != math.inf and not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite or inf, got {alpha!r}")
    f = lambda k: star_secular(k, n, ell, r, alpha)
    if f(0.0) <= 0.0:
        raise InfeasibleError(f"alpha={alpha:g} gives a non-positive first eigenvalue")
    step = math.pi / (32.0 * (ell + r))
    lo, flo = 0.0, f(0.0)
    for _ in range(100000):
        hi = lo + step
        fhi = f(hi)
        if flo * fhi <= 0.0:
            break
        lo, flo = hi, fhi
    else:
        raise RuntimeError("no sign change found for the star secular function")
    if fhi == 0.0:
        return hi
    k = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    df = lambda x: (f(x + 1e-7 * max(1.0, x)) - f(x - 1e-7 * max(1.0, x))) / (2e-7 * max(1.0, x))
    return _newton_polish(f, df, k, lo, hi)


def theta_phase(n: int, ell: float, r: float, k: float) -> float:
    """Phase ``theta = arccot(alpha/k)`` forced by the star equation at ``k`` (may be <= 0)."""
    return float(arccot(-n / math.tan(k * ell)) - k * r)


def robin_star_alpha(n: int, ell: float, r: float, k: float, allow_single: bool = False) -> float:
    """The Robin strength that makes ``k`` the first frequency of the star.

    Raises :class:`InfeasibleError` when no such strength exists, i.e. when the
    eigenfunction at ``k`` would have to vanish inside the r-edge.
    """
    _check_star(n, ell, r, allow_single)
    if not 0 < k * ell < math.pi or abs(math.sin(k * ell)) < 1e-15:
        raise InfeasibleError(f"k={k:g} outside (0, pi/ell)")
    theta = theta_phase(n, ell, r, k)
    if not 0.0 < theta < math.pi:
        raise InfeasibleError(
            f"k={k:g} needs phase theta={theta:.6g} outside (0, pi) for n={n}, ell={ell:g}, r={r:g}"
        )
    alpha = k / math.tan(theta)
    back = robin_star_k(n, ell, r, alpha, allow_single)
    if abs(back - k) > 1e-8 * max(1.0, k):
        raise InfeasibleError(f"k={k:g} is not the first frequency for alpha={alpha:g}")
    return alpha


@dataclass(frozen=True)
class LemmaComparison:
    alpha_d: float
    alpha_n: float
    k_d: float
    k_n: float
    length: float  # matched interval length
    lambda_interval: float  # first eigenvalue of the interval with alpha_n
    lambda_star: float  # first eigenvalue of the star with alpha_n
    gap: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def lemma_comparison(alpha_d: float, n: int, ell: float, r: float,
                     alpha_n: float | None = None) -> LemmaComparison:
    """Compare interval and star first eigenvalues at the complementary strength.

    ``alpha_n`` is determined by ``k_D + k_N = pi/ell``; if passed it must agree.
    The interval length is matched so both problems share ``k_D`` at ``alpha_d``.
    """
    _check_star(n, ell, r, False)
    k_d = robin_star_k(n, ell, r, alpha_d)
    if not math.pi / (2 * ell) < k_d < math.pi / ell:
        raise InfeasibleError(f"k_D={k_d:.6g} must lie in (pi/(2 ell), pi/ell)")
    k_n = math.pi / ell - k_d
    solved = robin_star_alpha(n, ell, r, k_n)
    if alpha_n is not None and abs(alpha_n - solved) > 1e-8 * max(1.0, abs(solved)):
        raise InfeasibleError(f"alpha_N={alpha_n:g} violates k_D + k_N = pi/ell (needs {solved:g})")
    L = matched_interval_length(alpha_d, k_d)
    lam_i = robin_interval_lambda(L, solved)
    lam_s = k_n * k_n
    return LemmaComparison(alpha_d, solved, k_d, k_n, L, lam_i, lam_s, lam_s - lam_i)


def lemma_sweep(n: int, ell: float, r: float, num: int = 100) -> list[LemmaComparison]:
    """``num`` admissible comparisons with ``k_D`` spread over its feasible range."""
    _check_star(n, ell, r, False)
    lo, hi = math.pi / (2 * ell), math.pi / ell
    # theta_D falls as k_D grows; the admissible range ends where it reaches 0
    g = lambda k: theta_phase(n, ell, r, k)
    ks = np.linspace(lo, hi, 2001)[1:-1]
    bad = np.flatnonzero([g(k) <= 0 for k in ks])
    if bad.size:
        if bad[0] == 0:
            raise InfeasibleError(f"no admissible k_D for n={n}, ell={ell:g}, r={r:g}")
        hi = brentq(g, ks[bad[0] - 1], ks[bad[0]])
    out = []
    for k_d in np.linspace(lo, hi, num + 2)[1:-1]:
        alpha_d = robin_star_alpha(n, ell, r, float(k_d))
        out.append(lemma_comparison(alpha_d, n, ell, r))
    return out


def appendix_f(x, ell: float, n: int):
    """``arccot(n cot(x ell))/ell - x`` on the open interval (pi/(2 ell), pi/ell)."""
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    x = np.asarray(x, dtype=float)
    lo, hi = math.pi / (2 * ell), math.pi / ell
    if np.any(x <= lo) or np.any(x >= hi):
        raise ValueError(f"x must lie in the open interval ({lo:.17g}, {hi:.17g})")
    out = arccot(n / np.tan(x * ell)) / ell - x
    return float(out) if out.ndim == 0 else out
