from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgratio.closed_form import (
    InfeasibleError,
    appendix_f,
    arccot,
    lemma_comparison,
    lemma_sweep,
    matched_interval_length,
    robin_interval_k,
    robin_interval_lambda,
    robin_star_alpha,
    robin_star_k,
    star_secular,
)
from qgratio.families import interval, star_with_tail
from qgratio.graph import VertexCondition
from qgratio.spectral import compute_spectrum

# frozen from a first run; cross-checked below against the graph solver
K_ALPHA_ONE = 2.028757838110434
LEMMA_R03 = dict(alpha_d=4.120405276003995, alpha_n=-0.2537795992270682, gap=0.7678673054333172)


def test_arccot_branch():
    assert arccot(1.0) == pytest.approx(math.pi / 4)
    assert arccot(-1.0) == pytest.approx(3 * math.pi / 4)
    assert arccot(0.0) == pytest.approx(math.pi / 2)


def test_robin_interval_basic_values():
    assert robin_interval_k(1.0, 0.0) == pytest.approx(math.pi / 2, abs=1e-14)
    assert robin_interval_k(1.0, 5.0, dirichlet=True) == pytest.approx(math.pi, abs=1e-14)
    k = robin_interval_k(1.0, 1.0)
    assert k == pytest.approx(K_ALPHA_ONE, abs=1e-12)
    assert abs(k * math.cos(k) + math.sin(k)) < 1e-12


def test_robin_interval_matches_graph_solver():
    H = interval(1.0).with_condition("v0", VertexCondition.delta(1.0))
    assert compute_spectrum(H, 1).lam(1) == pytest.approx(K_ALPHA_ONE**2, rel=1e-10)


def test_robin_interval_negative_alpha():
    with pytest.raises(InfeasibleError):
        robin_interval_k(1.0, -1.0)
    assert robin_interval_lambda(1.0, -1.0) == pytest.approx(0.0, abs=1e-12)
    assert robin_interval_lambda(1.0, -2.0) < 0


@pytest.mark.parametrize("alpha,k", [(0.0, math.pi / 2), (1.0, K_ALPHA_ONE), (-0.5, None), (30.0, None)])
def test_matched_length_round_trip(alpha, k):
    if k is None:
        k = robin_interval_k(1.0, alpha)
    L = matched_interval_length(alpha, k)
    assert L == pytest.approx(1.0, abs=1e-10)
    assert robin_interval_k(L, alpha) == pytest.approx(k, abs=1e-10)


def test_monotone_in_alpha():
    # L = 0.1 keeps the whole grid above -1/L
    alphas = np.concatenate([np.linspace(-5, 10, 61), np.geomspace(11, 1e3, 30)])
    ks = np.array([robin_interval_k(0.1, a) for a in alphas])
    assert np.all(np.diff(ks) > 0)
    pos = alphas > 0
    assert np.all(ks[pos] > math.pi / 0.2) and np.all(ks[pos] <= math.pi / 0.1)


def test_near_dirichlet_limit_monotone():
    # lengths matched to k = pi - delta grow toward pi/k as alpha grows
    k = math.pi - 1e-3
    Ls = [matched_interval_length(a, k) for a in (1e0, 1e1, 1e2, 1e3, 1e4)]
    assert np.all(np.diff(Ls) > 0) and Ls[-1] < math.pi / k


def test_star_single_leg_is_interval():
    for alpha in (-0.3, 0.0, 2.0):
        assert robin_star_k(1, 0.6, 0.4, alpha, allow_single=True) == pytest.approx(
            robin_interval_k(1.0, alpha), abs=1e-12)
    with pytest.raises(ValueError):
        robin_star_k(1, 0.6, 0.4, 0.0)


def test_star_neumann_tip_matches_graph():
    k = robin_star_k(2, 1.0, 1.0, 0.0)
    lam = compute_spectrum(star_with_tail(2, 1.0, 1.0, tip="N"), 1).lam(1)
    assert k * k == pytest.approx(lam, rel=1e-10)
    assert abs(star_secular(k, 2, 1.0, 1.0, 0.0)) < 1e-12


def test_star_large_alpha_tends_to_dirichlet():
    k = robin_star_k(3, 1.0, 0.5, 1e6)
    lam = compute_spectrum(star_with_tail(3, 1.0, 0.5, tip="D"), 1).lam(1)
    assert k == pytest.approx(math.sqrt(lam), abs=1e-4)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(2, 5), ell=st.floats(0.3, 2.0), r=st.floats(0.1, 2.0), alpha=st.floats(0.0, 20.0))
def test_star_matches_graph_solver(n, ell, r, alpha):
    # the graph solver covers nonnegative strengths only
    k = robin_star_k(n, ell, r, alpha)
    lam = compute_spectrum(star_with_tail(n, ell, r, tip=VertexCondition.delta(alpha)), 1).lam(1)
    assert k * k == pytest.approx(lam, rel=1e-9)


def test_star_alpha_inverts_k():
    for kd in (1.7, 1.9, 2.1):
        a = robin_star_alpha(2, 1.0, 0.3, kd)
        assert robin_star_k(2, 1.0, 0.3, a) == pytest.approx(kd, abs=1e-10)


def test_lemma_example():
    a = robin_star_alpha(2, 1.0, 0.3, 0.6 * math.pi)
    c = lemma_comparison(a, 2, 1.0, 0.3)
    assert c.alpha_d == pytest.approx(LEMMA_R03["alpha_d"], rel=1e-10)
    assert c.alpha_n == pytest.approx(LEMMA_R03["alpha_n"], rel=1e-9)
    assert c.gap == pytest.approx(LEMMA_R03["gap"], rel=1e-9)
    assert c.k_d + c.k_n == pytest.approx(math.pi, abs=1e-12)
    assert c.gap > 0


def test_lemma_r07_infeasible_at_06pi():
    with pytest.raises(InfeasibleError):
        robin_star_alpha(2, 1.0, 0.7, 0.6 * math.pi)


def test_lemma_sweep_long_robin_edge_infeasible():
    with pytest.raises(InfeasibleError):
        lemma_sweep(2, 1.0, 2.0)


@pytest.mark.parametrize("r", [0.3, 0.5, 0.7])
def test_lemma_sweep_positive(r):
    rows = lemma_sweep(2, 1.0, r, num=100)
    assert len(rows) == 100
    assert all(row.gap > 0 for row in rows)


def test_lemma_gap_vanishes_at_symmetric_point():
    rows = lemma_sweep(3, 1.0, 0.4, num=200)
    first = rows[0]
    assert first.k_d - math.pi / 2 < 1e-2
    assert first.gap < 0.05 * max(r.gap for r in rows)


def test_lemma_rejects_mismatched_alpha_n():
    a = robin_star_alpha(2, 1.0, 0.3, 0.6 * math.pi)
    with pytest.raises(InfeasibleError):
        lemma_comparison(a, 2, 1.0, 0.3, alpha_n=0.0)


@pytest.mark.parametrize("ell", [0.1, 1.0, 7.0])
@pytest.mark.parametrize("n", [2, 5, 10])
def test_appendix_f_positive_and_concave(ell, n):
    lo, hi = math.pi / (2 * ell), math.pi / ell
    x = np.linspace(lo, hi, 10_002)[1:-1]
    f = appendix_f(x, ell, n)
    assert np.all(f > 0)
    assert np.all(np.diff(f, 2) < 0)
    eps = 1e-9 * (hi - lo)
    assert abs(appendix_f(lo + eps, ell, n)) < 1e-6 * lo
    assert abs(appendix_f(hi - eps, ell, n)) < 1e-6 * hi


def test_appendix_f_domain():
    assert appendix_f(2.2, 1.0, 2) > 0
    with pytest.raises(ValueError):
        appendix_f(1.0, 1.0, 2)
    with pytest.raises(ValueError):
        appendix_f(2.2, 1.0, 1)
