import numpy as np
import pytest

from balancenet.errors import InvalidInput, NotPositiveDefinite
from balancenet.network import (
    GraphKind,
    GraphSpec,
    build_chain,
    build_from_edge_list,
    build_grid,
    bundled_edge_list,
    graph_spec_from_edges,
    parse_edge_list,
    random_diagonal_covariance,
    read_edge_list,
    set_injection_covariance,
    write_edge_list,
)


def check_invariants(model):
    B, Sx = model.b_star, model.sigma_x
    assert np.linalg.eigvalsh(B)[0] > 0
    np.testing.assert_allclose(model.theta_star, B @ np.linalg.inv(Sx) @ B, atol=1e-10)
    np.testing.assert_allclose(model.d_mat @ model.d_mat, np.linalg.inv(Sx), atol=1e-10)
    Binv = np.linalg.inv(B)
    np.testing.assert_allclose(np.linalg.inv(model.theta_star), Binv @ Sx @ Binv, atol=1e-9)
    np.testing.assert_allclose(model.sigma_star, Binv @ Sx @ Binv, atol=1e-9)
    for i in range(model.p):
        assert (i, i) in model.support_E
    off = {(i, j) for i in range(model.p) for j in range(model.p) if i != j and B[i, j] != 0}
    assert model.offdiag_edges() == off


def test_chain_examples():
    m = build_chain(3)
    np.testing.assert_array_equal(m.b_star, [[2, 1, 0], [1, 3, 1], [0, 1, 2]])
    assert m.degree_d == 3
    assert build_chain(2).degree_d == 2
    assert build_chain(32).s_offdiag == 62
    check_invariants(build_chain(32))
    with pytest.raises(InvalidInput):
        build_chain(1)
    with pytest.raises(InvalidInput):
        build_chain(4, diag_margin=0)


def test_chain_margin_and_weight():
    m = build_chain(4, edge_weight=0.5, diag_margin=4.0)
    assert m.b_star[1, 1] == pytest.approx(5.0)
    assert m.b_star[0, 0] == pytest.approx(4.5)
    assert m.b_star[0, 1] == 0.5
    signed = build_chain(4, edge_weight=-1.0)
    assert signed.b_star[0, 1] == -1.0 and signed.b_star[1, 1] == 3.0


def test_grid_examples():
    m = build_grid(2, 2)
    assert m.s_offdiag == 8
    assert all(int((m.b_star[i] != 0).sum()) - 1 == 2 for i in range(4))
    m = build_grid(4, 8)
    interior = 1 * 8 + 3
    assert int((m.b_star[interior] != 0).sum()) - 1 == 4
    assert m.degree_d == 5
    assert build_grid(8, 8).s_offdiag == 2 * (2 * 64 - 8 - 8)
    check_invariants(m)


def test_edge_list_examples():
    path = graph_spec_from_edges([(0, 1, 1.0), (1, 2, 1.0)])
    m = build_from_edge_list(path, laplacian_mode=True, reduce_node=0)
    np.testing.assert_array_equal(m.b_star, [[2, -1], [-1, 1]])
    triangle = graph_spec_from_edges([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    with pytest.raises(NotPositiveDefinite):
        build_from_edge_list(triangle, laplacian_mode=True)
    signed = build_from_edge_list(path, laplacian_mode=False)
    np.testing.assert_array_equal(signed.b_star, build_chain(3).b_star)


def test_edge_list_reduction_requires_connected_graph():
    spec = GraphSpec(GraphKind.EDGE_LIST, 4, ((0, 1, 1.0), (2, 3, 1.0)))
    with pytest.raises(InvalidInput):
        build_from_edge_list(spec, laplacian_mode=True, reduce_node=0)
    with pytest.raises(InvalidInput):
        build_from_edge_list(spec, laplacian_mode=True, reduce_node=9)


@pytest.mark.parametrize("name,edges", [("ieee33", 32), ("ieee33-loops", 38)])
def test_bundled_feeder(name, edges):
    raw = bundled_edge_list(name)
    assert len(raw) == edges
    m = build_from_edge_list(graph_spec_from_edges(raw), laplacian_mode=True, reduce_node=0)
    assert m.p == 32
    assert np.linalg.eigvalsh(m.b_star)[0] > 0
    check_invariants(m)


def test_feeder_loops_have_stated_cycle_lengths():
    base = bundled_edge_list("ieee33")
    loops = bundled_edge_list("ieee33-loops")[len(base):]
    adj = {}
    for i, j, _ in base:
        adj.setdefault(i, set()).add(j)
        adj.setdefault(j, set()).add(i)

    def tree_distance(a, b):
        frontier, seen, dist = {a}, {a}, 0
        while b not in frontier:
            frontier = {v for u in frontier for v in adj[u]} - seen
            seen |= frontier
            dist += 1
        return dist

    lengths = sorted(tree_distance(i, j) + 1 for i, j, _ in loops)
    assert lengths == [3, 3, 3, 4, 4, 5]


def test_graph_spec_validation():
    with pytest.raises(InvalidInput):
        GraphSpec(GraphKind.EDGE_LIST, 3, ((1, 1, 1.0),))
    with pytest.raises(InvalidInput):
        GraphSpec(GraphKind.EDGE_LIST, 3, ((0, 3, 1.0),))
    with pytest.raises(InvalidInput):
        GraphSpec(GraphKind.GRID, 6, grid_rows=2, grid_cols=2)
    with pytest.raises(ValueError):
        GraphSpec("ring", 3)


def test_injection_covariance_examples():
    m = build_chain(5)
    np.testing.assert_allclose(m.d_mat, np.eye(5))
    np.testing.assert_allclose(m.theta_star, m.b_star @ m.b_star)
    m4 = set_injection_covariance(m, 4 * np.eye(5))
    np.testing.assert_allclose(m4.d_mat, 0.5 * np.eye(5), atol=1e-12)
    Sx = random_diagonal_covariance(5, seed=3)
    assert np.all((np.diag(Sx) >= 0.5) & (np.diag(Sx) <= 1.5))
    mr = set_injection_covariance(m, Sx)
    np.testing.assert_allclose(mr.d_mat @ mr.d_mat @ Sx, np.eye(5), atol=1e-10)
    check_invariants(mr)
    with pytest.raises(NotPositiveDefinite):
        set_injection_covariance(m, -np.eye(5))
    with pytest.raises(InvalidInput):
        set_injection_covariance(m, np.eye(4))


def test_edge_list_parsing(tmp_path):
    text = "# header\n0 1\n1 2 2.5  # trailing\n\n"
    assert parse_edge_list(text) == [(0, 1, 1.0), (1, 2, 2.5)]
    with pytest.raises(InvalidInput):
        parse_edge_list("0 1 2 3\n")
    with pytest.raises(InvalidInput):
        parse_edge_list("a b\n")
    path = tmp_path / "e.edges"
    write_edge_list(path, [(0, 1), (2, 3)], header="test")
    assert read_edge_list(path) == [(0, 1, 1.0), (2, 3, 1.0)]
