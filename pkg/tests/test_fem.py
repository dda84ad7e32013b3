from __future__ import annotations

import math

import numpy as np
import pytest

from qgratio.families import balloon_bunch, big_star, equilateral_star, interval, random_graph
from qgratio.fem import (
    MeshError,
    _solve,
    build_mesh,
    convergence_study,
    fem_count_below,
    fem_eigenvalues,
    fem_spectrum,
    rayleigh_quotient,
    richardson,
    write_convergence_csv,
)
from qgratio.spectral import compute_spectrum

PI2 = math.pi**2


def test_interval_upper_bound():
    lam = fem_spectrum(interval(1.0), 1, 1e-3).lam(1)
    assert PI2 <= lam <= PI2 + 1e-4 * PI2**2


def test_star_from_above_with_richardson():
    G = equilateral_star(3, math.pi)
    h = math.pi / 400
    a = fem_eigenvalues(G, 1, h)[0]
    b = fem_eigenvalues(G, 1, h, multiplier=2)[0]
    assert a > b > 0.25
    assert richardson(a, b) == pytest.approx(0.25, rel=1e-8)


def test_kirchhoff_zero_mode_exact():
    G = equilateral_star(4, 1.0, leaf="N")
    (vals, vecs), free = _solve(build_mesh(G, 0.1), 2, vectors=True)
    assert fem_eigenvalues(G, 1, 0.1)[0] == 0.0
    v = vecs[:, 0]
    assert np.ptp(v / v[0]) < 1e-10


def test_mesh_errors():
    with pytest.raises(MeshError):
        build_mesh(interval(1.0), 1.5)
    with pytest.raises(MeshError):
        build_mesh(interval(1.0), 0.0)


def test_tent_quotient():
    for n in (20, 200, 2000):
        mesh = build_mesh(interval(1.0), 1.0 / n)
        f = mesh.interpolate(lambda e, x: np.minimum(x, 1.0 - x))
        q = rayleigh_quotient(mesh, f)
        assert q >= PI2
    assert q == pytest.approx(12.0, rel=1e-5)


def test_quotient_of_eigenvector():
    mesh = build_mesh(balloon_bunch(2, 0.2, 1.0), 0.01)
    (vals, vecs), free = _solve(mesh, 1, vectors=True)
    f = np.zeros(mesh.num_nodes)
    f[free] = vecs[:, 0]
    assert rayleigh_quotient(mesh, f) == pytest.approx(vals[0], rel=1e-10)


def test_quotient_rejects_bad_input():
    mesh = build_mesh(interval(1.0), 0.1)
    with pytest.raises(ValueError):
        rayleigh_quotient(mesh, np.zeros(mesh.num_nodes))
    with pytest.raises(ValueError):
        rayleigh_quotient(mesh, np.ones(mesh.num_nodes))


def test_short_edge_test_function_drives_quotient_down():
    # 1 on the hub and the short edges, linear to 0 along the long edge
    qs = []
    for m in (20, 80, 320):
        G = big_star(1.0, m, 0.01)
        mesh = build_mesh(G, 0.002)

        def f(eid, x, G=G):
            e = G.edge(eid)
            if G.condition(e.tail).is_dirichlet:
                return x / e.length
            if G.condition(e.head).is_dirichlet:
                return 1.0 - x / e.length
            return np.ones_like(x)

        qs.append(rayleigh_quotient(mesh, mesh.interpolate(f)))
    assert qs[0] > qs[1] > qs[2]
    assert qs[2] == pytest.approx(1.0 / (320 * 0.01 + 1.0 / 3.0), rel=1e-6)


def test_interval_convergence_order():
    rows, flagged = convergence_study(interval(1.0), 3, [1e-2, 5e-3, 2.5e-3])
    assert not flagged
    last = [r for r in rows if r.h == 2.5e-3]
    assert all(abs(r.order - 2.0) < 0.05 for r in last)


@pytest.mark.parametrize("G", [equilateral_star(5, 1.0), balloon_bunch(2, 0.1, 1.0)], ids=["star5", "balloons"])
def test_graph_convergence_order(G):
    rows, flagged = convergence_study(G, 3, [1e-2, 5e-3, 2.5e-3])
    assert not flagged


def test_convergence_inputs_and_csv(tmp_path):
    with pytest.raises(ValueError):
        convergence_study(interval(1.0), 1, [0.1, 0.05])
    with pytest.raises(ValueError):
        convergence_study(interval(1.0), 1, [0.1, 0.2, 0.05])
    rows, _ = convergence_study(interval(1.0), 1, [0.1, 0.05, 0.025])
    p = tmp_path / "conv.csv"
    write_convergence_csv(rows, p)
    assert p.read_text().splitlines()[0] == "h,k,lambda,order"


@pytest.mark.parametrize("seed", [1, 4, 9])
def test_variational_property(seed):
    G = random_graph(seed, max_edges=6, beta=1, neumann=1)
    exact = compute_spectrum(G, 6).eigenvalues[:6]
    approx = fem_eigenvalues(G, 6, G.total_length / 500)
    assert np.all(approx >= exact - 1e-9)


def test_count_below_matches_secular():
    G = random_graph(7, max_edges=6, beta=2, neumann=1)
    ev = compute_spectrum(G, 8).eigenvalues[:8]
    for i in range(1, 7):
        mid = 0.5 * (ev[i - 1] + ev[i])
        if ev[i] - ev[i - 1] > 1e-3 * ev[i]:
            assert fem_count_below(G, mid, G.total_length / 2000) == i
