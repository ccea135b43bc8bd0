import numpy as np
import pytest

from balancenet.errors import InvalidInput, NoEdges
from balancenet.linalg import IndexSet
from balancenet.metrics import bmin, score
from balancenet.network import _model_from_matrix, build_chain, build_from_edge_list, bundled_edge_list, \
    graph_spec_from_edges
from balancenet.solver import support_of


def test_perfect_estimate():
    m = build_chain(5)
    s = score(m.b_star, m, m.support_E)
    assert s.exact_recovery and s.sign_consistent
    assert s.err_inf == s.err_fro == s.err_op2 == 0.0
    assert s.support_precision == s.support_recall == 1.0


def test_missing_edge():
    m = build_chain(5)
    B = m.b_star.copy()
    B[1, 2] = B[2, 1] = 0.0
    s = score(B, m, support_of(B))
    assert not s.exact_recovery and not s.sign_consistent
    assert s.support_recall == pytest.approx(3 / 4)
    assert s.support_precision == 1.0


def test_diagonal_perturbation():
    m = build_chain(5)
    B = m.b_star.copy()
    B[2, 2] += 0.1
    s = score(B, m, support_of(B))
    assert s.exact_recovery
    assert s.err_inf == pytest.approx(0.1)
    assert s.err_fro == pytest.approx(0.1)


def test_sign_flip_and_false_positive():
    m = build_chain(4)
    B = m.b_star.copy()
    B[0, 1] = B[1, 0] = -0.5
    s = score(B, m, support_of(B))
    assert s.exact_recovery and not s.sign_consistent
    B = m.b_star.copy()
    B[0, 3] = B[3, 0] = 0.2
    s = score(B, m, support_of(B))
    assert not s.exact_recovery and s.support_precision == pytest.approx(3 / 4)


def test_order_invariance():
    m = build_chain(4)
    pairs = list(m.support_E.pairs)
    a = score(m.b_star, m, IndexSet.from_pairs(pairs, 4))
    b = score(m.b_star, m, IndexSet.from_pairs(pairs[::-1], 4))
    assert a == b


def test_norm_chain_on_support_perturbations():
    rng = np.random.default_rng(0)
    m = build_chain(12, diag_margin=4.0)
    mask = m.support_E.mask()
    for _ in range(200):
        delta = rng.standard_normal((12, 12)) * mask
        delta = 0.05 * (delta + delta.T)
        s = score(m.b_star + delta, m, m.support_E)
        assert s.err_op2 <= s.err_fro + 1e-12
        assert s.err_op2 <= m.degree_d * s.err_inf + 1e-12
        assert s.err_fro <= np.sqrt(m.s_offdiag + m.p) * s.err_inf + 1e-12


def test_dimension_mismatch():
    m = build_chain(4)
    with pytest.raises(InvalidInput):
        score(np.eye(3), m, m.support_E)


def test_bmin_examples():
    assert bmin(build_chain(6)) == 1.0
    mixed = build_from_edge_list(graph_spec_from_edges([(0, 1, 0.5), (1, 2, 2.0)]), laplacian_mode=False)
    assert bmin(mixed) == 0.5
    feeder = build_from_edge_list(graph_spec_from_edges(bundled_edge_list("ieee33")), reduce_node=0)
    assert bmin(feeder) == 1.0
    with pytest.raises(NoEdges):
        bmin(_model_from_matrix(np.eye(3)))
