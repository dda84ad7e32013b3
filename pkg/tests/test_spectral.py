from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgratio.families import balloon_bunch, cycle, equilateral_star, interval, random_graph, random_tree
from qgratio.graph import DIRICHLET, insert_dummy, graph_stats
from qgratio.spectral import (
    EigenfunctionError,
    NonGenericError,
    Spectrum,
    compute_spectrum,
    eigenfunction,
    eigenfunctions,
    nodal_count,
    secular_matrix,
)

PI2 = math.pi**2


def sigmas(G, k):
    return np.linalg.svd(secular_matrix(G, k), compute_uv=False)


def test_secular_matrix_shape_and_null_space():
    G = interval(1.0)
    S = secular_matrix(G, math.pi)
    assert S.shape == (2, 2)
    assert sigmas(G, math.pi)[-1] < 1e-12
    assert sigmas(G, math.pi / 2)[-1] > 0.1
    s = sigmas(equilateral_star(3, math.pi), 0.5)
    assert s[-1] < 1e-12 and s[-2] > 1e-3
    with pytest.raises(ValueError):
        secular_matrix(G, 0.0)


def test_interval_first_three():
    spec = compute_spectrum(interval(1.0), 3)
    assert spec.eigenvalues == pytest.approx([PI2, 4 * PI2, 9 * PI2], rel=1e-12)
    assert spec.multiplicities[:3] == (1, 1, 1)


def test_equilateral_star_pi():
    spec = compute_spectrum(equilateral_star(3, math.pi), 4)
    assert spec.eigenvalues[:4] == pytest.approx([0.25, 1.0, 1.0, 2.25], rel=1e-10)
    assert spec.multiplicity_of(2) == 2


@pytest.mark.parametrize("m", [2, 3, 5])
def test_dirichlet_center_star_fully_degenerate(m):
    spec = compute_spectrum(equilateral_star(m, 0.5, center="D"), m)
    assert spec.multiplicity_of(1) == m
    assert spec.lam(1) == pytest.approx(PI2 / 0.25, rel=1e-10)


def test_zero_mode_only_without_dirichlet():
    spec = compute_spectrum(cycle(1.0), 3)
    assert spec.lam(1) == 0.0 and spec.multiplicity_of(1) == 1
    assert spec.lam(2) == pytest.approx(4 * PI2, rel=1e-10)
    assert spec.multiplicity_of(2) == 2
    assert compute_spectrum(interval(1.0, "N", "D"), 1).lam(1) == pytest.approx(PI2 / 4, rel=1e-12)


def test_spectrum_dict_round_trip():
    spec = compute_spectrum(equilateral_star(3, 1.0), 4)
    assert Spectrum.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("seed", [1, 8, 21])
def test_scaling_law(seed):
    G = random_tree(seed)
    a = compute_spectrum(G, 6).eigenvalues[:6]
    b = compute_spectrum(G.scaled(2.5), 6).eigenvalues[:6]
    assert b == pytest.approx(a / 6.25, rel=1e-10)


@pytest.mark.parametrize("seed", [2, 5])
def test_dummy_vertex_invariance(seed):
    G = random_graph(seed, max_edges=6, beta=1, neumann=1)
    e = G.edges[-1]
    H = insert_dummy(G, e.id, 0.37 * e.length)
    a = compute_spectrum(G, 6).eigenvalues[:6]
    b = compute_spectrum(H, 6).eigenvalues[:6]
    assert b == pytest.approx(a, rel=1e-10, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 500))
def test_weyl_consistency(seed):
    G = random_graph(seed, max_edges=5, beta=1, neumann=1)
    s = graph_stats(G).as_dict()
    ev = compute_spectrum(G, 12).eigenvalues
    K = math.sqrt(ev[11]) * 0.999
    count = int(np.sum(np.sqrt(np.maximum(ev, 0)) <= K))
    assert abs(count - K * s["L"] / math.pi) <= s["m"] + s["D"] + s["N"] + s["beta"]


def test_dirichlet_point_raises_eigenvalues():
    G = random_tree(4)
    e = G.edges[0]
    H = insert_dummy(G, e.id, 0.5 * e.length, vertex_id="cut").with_condition("cut", DIRICHLET)
    a = compute_spectrum(G, 6).eigenvalues[:6]
    b = compute_spectrum(H, 6).eigenvalues[:6]
    assert np.all(b >= a * (1 - 1e-10))


def test_interval_eigenfunction():
    ef = eigenfunction(interval(1.0), PI2)
    xs = np.linspace(0, 1, 7)
    assert ef.value("e0", xs) == pytest.approx(math.sqrt(2) * np.sin(math.pi * xs), abs=1e-10)
    assert ef.norm() == pytest.approx(1.0, abs=1e-12)


def test_star_ground_state_normalization():
    G = equilateral_star(3, math.pi)
    ef = eigenfunction(G, 0.25)
    c = math.sqrt(2 / (3 * math.pi))
    xs = np.linspace(0, math.pi, 5)
    for e in G.edges:
        assert ef.value(e.id, xs) == pytest.approx(c * np.cos(xs / 2), abs=1e-10)


def test_star_double_eigenvalue_basis():
    G = equilateral_star(3, math.pi)
    efs = eigenfunctions(G, 1.0)
    assert len(efs) == 2
    for ef in efs:
        for w in ef.waves:
            assert abs(w.A) < 1e-10  # pure sine from the center
        res = ef.vertex_residuals()
        assert max(res.values()) < 1e-8
    with pytest.raises(EigenfunctionError):
        eigenfunction(G, 0.5)


@pytest.mark.parametrize("seed", [0, 3, 12])
def test_vertex_residuals_small(seed):
    G = random_graph(seed, max_edges=6, beta=2, neumann=2)
    spec = compute_spectrum(G, 5)
    for lam in spec.values[:4]:
        for ef in eigenfunctions(G, lam):
            assert max(ef.vertex_residuals().values()) < 1e-8
            assert ef.norm() == pytest.approx(1.0, abs=1e-10)


def test_first_eigenfunction_positive():
    G = random_tree(9)
    ef = eigenfunction(G, compute_spectrum(G, 1).lam(1))
    for e in G.edges:
        assert np.all(ef.value(e.id, np.linspace(0.05, 0.95, 9) * e.length) > 0)


def test_nodal_counts_interval():
    G = interval(1.0)
    for k in range(1, 6):
        assert nodal_count(eigenfunction(G, (k * math.pi) ** 2)) == k


@pytest.mark.parametrize("seed", [6, 15, 33])
def test_nodal_counts_tree(seed):
    G = random_tree(seed)
    spec = compute_spectrum(G, 5)
    for k in range(1, 6):
        if spec.multiplicity_of(k) == 1:
            assert nodal_count(eigenfunction(G, spec.lam(k))) == k


def test_nodal_count_non_generic():
    G = equilateral_star(3, math.pi)
    with pytest.raises(NonGenericError):
        nodal_count(eigenfunctions(G, 1.0)[0])


def test_eigenfunction_csv(tmp_path):
    ef = eigenfunction(balloon_bunch(2, 0.3, 1.0), compute_spectrum(balloon_bunch(2, 0.3, 1.0), 1).lam(1))
    p = tmp_path / "ef.csv"
    ef.write_csv(p, resolution=8)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["edge", "x", "psi"]
    assert len(lines) > 8
