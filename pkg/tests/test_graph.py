from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgratio.families import (
    balloon_bunch,
    big_star,
    cycle,
    equilateral_star,
    interval,
    make_family,
    parse_family,
    random_graph,
    random_tree,
    star_with_tail,
)
from qgratio.graph import (
    DIRICHLET,
    KIRCHHOFF,
    Edge,
    GraphError,
    MetricGraph,
    Topology,
    Vertex,
    VertexCondition,
    contract_edge,
    graph_from_dict,
    graph_stats,
    graph_to_dict,
    insert_dummy,
    read_graph,
    split_at_vertex,
    split_loops,
    suppress_dummies,
    write_graph,
)


def stats(G):
    return graph_stats(G).as_dict()


def test_interval_stats():
    assert stats(interval(1.0)) == {"L": 1.0, "m": 1, "n": 2, "beta": 0, "D": 2, "N": 0}


def test_equilateral_star_stats():
    G = equilateral_star(3, math.pi)
    s = stats(G)
    assert s["m"] == 3 and s["D"] == 3 and s["beta"] == 0
    assert s["L"] == pytest.approx(3 * math.pi)
    assert stats(equilateral_star(5, 1.0)) == {"L": 5.0, "m": 5, "n": 6, "beta": 0, "D": 5, "N": 0}


def test_big_star_matches_figure_graph():
    s = stats(big_star(1.0, 7, 0.05))
    assert (s["D"], s["N"], s["beta"], s["m"]) == (1, 7, 0, 8)


def test_balloon_bunch_stats():
    s = stats(balloon_bunch(3, 0.1, 1.0))
    assert (s["beta"], s["D"], s["N"]) == (3, 1, 0)


def test_condition_validation():
    with pytest.raises(GraphError):
        VertexCondition("robin", 1.0)
    with pytest.raises(GraphError):
        VertexCondition.delta(math.inf)
    assert VertexCondition("dirichlet", 5.0).strength == 0.0
    assert KIRCHHOFF.is_kirchhoff and not DIRICHLET.is_kirchhoff


def test_bad_graphs_rejected():
    with pytest.raises(GraphError):
        interval(0.0)
    with pytest.raises(GraphError):
        equilateral_star(0)
    with pytest.raises(GraphError):
        MetricGraph((Vertex("a"), Vertex("b"), Vertex("c")), (Edge("e", "a", "b", 1.0),))
    with pytest.raises(GraphError):
        make_family("pentagram")


def test_insert_dummy_preserves_stats():
    G = equilateral_star(3, 1.0)
    H = insert_dummy(G, "e0", 1.0 / 3.0)
    a, b = stats(G), stats(H)
    assert b["m"] == a["m"] + 1 and b["n"] == a["n"] + 1
    assert b["beta"] == a["beta"] and b["D"] == a["D"] and b["N"] == a["N"]
    assert b["L"] == pytest.approx(a["L"], rel=1e-15)


@pytest.mark.parametrize("x", [0.0, 1.0, -0.1, 2.0])
def test_insert_dummy_range(x):
    with pytest.raises(GraphError):
        insert_dummy(interval(1.0), "e0", x)


def test_suppress_round_trip():
    G = interval(1.0)
    H = suppress_dummies(insert_dummy(G, "e0", 0.5))
    assert len(H.edges) == 1 and H.total_length == pytest.approx(1.0, abs=1e-15)


def test_suppress_keeps_non_kirchhoff_degree_two():
    G = insert_dummy(interval(1.0), "e0", 0.5, vertex_id="m")
    assert len(suppress_dummies(G.with_condition("m", VertexCondition.delta(1.5))).edges) == 2
    assert len(suppress_dummies(G.with_condition("m", DIRICHLET)).edges) == 2


def test_contract_edge_rules():
    G = insert_dummy(interval(1.0), "e0", 0.5, vertex_id="m")
    H = contract_edge(G, G.edges[1].id)
    assert len(H.edges) == 1 and H.total_length == pytest.approx(0.5)

    G = MetricGraph(
        (Vertex("a", VertexCondition.delta(1.0)), Vertex("b", VertexCondition.delta(2.0)), Vertex("c", DIRICHLET)),
        (Edge("ab", "a", "b", 1.0), Edge("bc", "b", "c", 1.0)),
    )
    assert contract_edge(G, "ab").condition("a") == VertexCondition.delta(3.0)
    assert contract_edge(G, "bc").condition("b").is_dirichlet
    with pytest.raises(GraphError):
        contract_edge(interval(1.0), "e0")


def test_contract_loop_needs_flag():
    G = balloon_bunch(2, 0.1, 1.0)
    with pytest.raises(GraphError):
        contract_edge(G, "loop0")
    H = contract_edge(G, "loop0", allow_loop=True)
    assert H.betti == 1 and len(H.vertices) == len(G.vertices)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), beta=st.integers(0, 2))
def test_betti_invariant_under_mutations(seed, beta):
    G = random_graph(seed, max_edges=6, beta=beta, neumann=1)
    assert G.betti == len(G.edges) - len(G.vertices) + 1 >= 0
    e = G.edges[0]
    H = insert_dummy(G, e.id, e.length / 2)
    assert H.betti == G.betti
    if len(G.edges) > 1:
        C = contract_edge(G, e.id, allow_loop=True)
        assert len(C.edges) == len(G.edges) - 1
        assert C.total_length == pytest.approx(G.total_length - e.length)
        assert C.betti == G.betti - (1 if e.is_loop else 0)
    S = suppress_dummies(H)
    assert S.betti == G.betti


def test_split_at_vertex_and_loops():
    G = equilateral_star(3, 1.0, center="D")
    parts = split_at_vertex(G, "c")
    assert len(parts) == 3 and all(len(p.edges) == 1 for p in parts)
    with pytest.raises(GraphError):
        split_at_vertex(equilateral_star(3, 1.0), "c")
    H, origin = split_loops(balloon_bunch(2, 0.2, 1.0))
    assert all(not e.is_loop for e in H.edges)
    assert H.total_length == pytest.approx(1.4)
    assert {o[0] for o in origin.values()} >= {"loop0", "loop1"}


def test_topology_realize_contracts_zeros():
    T = Topology.of(equilateral_star(3, 1.0))
    G = T.realize([0.5, 0.0, 0.5])
    assert len(G.edges) == 2 and G.condition("c").is_dirichlet
    with pytest.raises(GraphError):
        T.realize([0.0, 0.0, 0.0])


def test_json_round_trip(tmp_path):
    G = random_graph(3, max_edges=6, beta=2, neumann=1)
    G = G.with_condition(G.vertices[0].id, VertexCondition.delta(0.1 + 1e-16 * 3))
    p = tmp_path / "g.json"
    write_graph(G, p)
    H = read_graph(p)
    assert graph_to_dict(H) == graph_to_dict(G)
    assert H.fingerprint() == G.fingerprint()
    with pytest.raises(GraphError):
        graph_from_dict({"vertices": [{"id": "a", "condition": "weird"}], "edges": []})


def test_random_tree_deterministic():
    a, b = random_tree(11), random_tree(11)
    assert graph_to_dict(a) == graph_to_dict(b)
    assert a.is_dirichlet_tree()
    assert all(0.1 <= e.length <= 2.0 for e in a.edges)


def test_parse_family():
    assert parse_family("interval:2", ends="N,D").condition("v0").is_kirchhoff
    assert len(parse_family("star:4:0.5").edges) == 4
    assert parse_family("startail:2:1:0.3").edge("tail").length == 0.3
    assert stats(parse_family("bigstar:1:20:0.01"))["N"] == 20
    assert parse_family("cycle:1").betti == 1
    for bad in ("star", "star:x", "interval:1:2:3", "hexagon:1"):
        with pytest.raises(GraphError):
            parse_family(bad)


def test_star_with_tail_shape():
    G = star_with_tail(3, 1.0, 0.4, tip=VertexCondition.delta(2.0))
    assert G.condition("tip").strength == 2.0
    assert G.total_length == pytest.approx(3.4)
    assert cycle(2.0).total_length == 2.0
