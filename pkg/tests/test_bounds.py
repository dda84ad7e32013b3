from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from qgratio.bounds import (
    bound_report,
    counterexample_sweep,
    ensemble_rows,
    general_ensemble,
    infimum_witness,
    interlacing_check,
    is_increasing,
    tau_ratio,
    tree_ensemble,
    write_ensemble_csv,
)
from qgratio.families import big_star, cycle, equilateral_star, interval, random_tree, star
from qgratio.graph import GraphError

PI2 = math.pi**2


def entry(rep, name, idx):
    (e,) = [e for e in rep.by_name(name) if e.indices == idx]
    return e


def test_interval_equality_cases():
    rep = bound_report(interval(1.0), 4)
    assert rep.passed
    assert abs(entry(rep, "b", (2, 1)).margin) < 1e-10
    for k in range(1, 5):
        assert abs(entry(rep, "f", (k,)).margin) < 1e-9 * PI2 * k * k
    vc = rep.by_name("vc")
    assert all(e.lhs == pytest.approx(4.0, rel=1e-10) for e in vc)


def test_equilateral_star_five():
    rep = bound_report(equilateral_star(5, 1.0), 6)
    assert rep.passed
    lam = rep.eigenvalues
    assert lam[5] / lam[4] == pytest.approx(9 / 4, rel=1e-10)
    assert entry(rep, "c", (6, 3)).margin == pytest.approx(4 - 9 / 4, rel=1e-9)
    assert abs(entry(rep, "b", (2, 1)).margin) < 1e-9


def test_big_star_gating():
    rep = bound_report(big_star(1.0, 20, 0.01), 2)
    assert rep.passed
    for name in ("a", "b", "c", "d", "f"):
        assert rep.by_name(name) and not any(e.applicable for e in rep.by_name(name))
    e = entry(rep, "e", (2, 1))
    assert not e.applicable and "N+beta+1" in e.reason
    assert all(e.applicable and e.passed for e in rep.by_name("i"))


def test_cycle_gating():
    rep = bound_report(cycle(1.0), 3)
    assert rep.passed
    assert not any(e.applicable for e in rep.by_name("g") + rep.by_name("h") + rep.by_name("j"))


def test_report_json_round_trip():
    rep = bound_report(random_tree(3), 3)
    d = json.loads(rep.to_json())
    assert d["pass"] is True and len(d["entries"]) == len(rep.entries)
    assert d["entries"][0]["name"] == rep.entries[0].name
    assert rep.entries[0].describe().startswith("(")


def test_report_rejects_small_kmax():
    with pytest.raises(ValueError):
        bound_report(interval(1.0), 1)


@pytest.mark.parametrize("seed", range(0, 200, 23))
def test_tree_reports_pass(seed):
    rep = bound_report(tree_ensemble(seed), 8)
    assert rep.passed, [e.describe() for e in rep.failures()]


@pytest.mark.parametrize("seed", [0, 13, 34, 49, 77, 94])
def test_general_reports_pass(seed):
    rep = bound_report(general_ensemble(seed), 8)
    assert rep.passed, [e.describe() for e in rep.failures()]


def test_tau_ratio():
    assert tau_ratio(interval(1.0), "v1") == pytest.approx(4.0, rel=1e-12)
    assert tau_ratio(star([0.4, 0.7, 1.0]), "leaf0") < 4.0
    with pytest.raises(GraphError):
        tau_ratio(star([1.0, 1.0]), "c")


def test_interlacing_interval_neumann_end():
    G = interval(1.0, "N", "D")
    res = interlacing_check(G, "v0", k_max=6)
    assert res.passed
    k = np.arange(1, 7)
    assert res.base.eigenvalues[:6] == pytest.approx((2 * k - 1) ** 2 * PI2 / 4, rel=1e-10)
    assert res.dirichlet.eigenvalues[:6] == pytest.approx(k**2 * PI2, rel=1e-10)


@pytest.mark.parametrize("seed", [2, 7, 19])
def test_interlacing_tree_leaf(seed):
    G = random_tree(seed)
    leaf = next(v.id for v in G.vertices if G.degree(v.id) == 1)
    assert interlacing_check(G, leaf, k_max=8).passed


def test_interlacing_cycle_point():
    G = cycle(1.0)
    res = interlacing_check(G, (G.edges[0].id, 0.3), k_max=6)
    assert res.passed
    # lambda_k(G) <= lambda_k(G') <= lambda_{k+1}(G)
    assert res.dirichlet.lam(1) == pytest.approx(PI2, rel=1e-10)


def test_interlacing_rejects_delta():
    from qgratio.graph import VertexCondition

    G = interval(1.0).with_condition("v0", VertexCondition.delta(2.0))
    with pytest.raises(ValueError):
        interlacing_check(G, "v0")


def test_big_star_sweep():
    rows = counterexample_sweep("big_star", [5, 10, 20, 40], eps=0.01)
    assert is_increasing(rows)
    assert rows[-1].ratio > 5


def test_balloon_sweep():
    assert is_increasing(counterexample_sweep("balloon_bunch", [2, 4, 8]))


def test_sweep_empty_star_is_interval():
    (row,) = counterexample_sweep("big_star", [0], tip="D")
    assert row.ratio == pytest.approx(4.0, rel=1e-10)
    with pytest.raises(ValueError):
        counterexample_sweep("spiral", [1])


@pytest.mark.parametrize("k,j", [(3, 2), (4, 2), (4, 3), (4, 1), (2, 1)])
def test_infimum_witness(k, j):
    w = infimum_witness(k, j)
    assert w.ratio == pytest.approx(1.0, abs=1e-9)


def test_dirichlet_tree_first_eigenvalue_simple():
    G = random_tree(21)
    rep = bound_report(G, 2)
    assert rep.eigenvalues[1] / rep.eigenvalues[0] > 1.0 + 1e-6


def test_witness_rejects_bad_indices():
    with pytest.raises(ValueError):
        infimum_witness(2, 2)


def test_ensemble_csv(tmp_path):
    rows = ensemble_rows(range(3), k_max=3)
    assert rows and all(r["pass"] for r in rows)
    p = tmp_path / "ens.csv"
    write_ensemble_csv(rows, p)
    with open(p) as fh:
        header = next(csv.reader(fh))
    assert header == ["seed", "inequality", "indices", "lhs", "rhs", "margin", "pass"]
