import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structsum.graph import (
    SEQUENCE,
    SUPPLEMENTARY,
    Graph,
    GraphError,
    flatten_batch,
    segment_softmax,
    segment_sum,
    unflatten_batch,
    validate_graph,
)

from conftest import graphs


def test_validate_minimal_graph_ok():
    g = Graph.build(["a", "b"], [SEQUENCE, SEQUENCE], [[(0, 1)]])
    assert validate_graph(g, 1).ok


def test_validate_reports_out_of_range_endpoint():
    g = Graph.build(["a", "b"], [SEQUENCE, SEQUENCE], [[(0, 5)]])
    report = validate_graph(g, 1)
    assert not report.ok
    assert any("endpoint out of range" in v for v in report.violations)


def test_validate_reports_edge_type_arity():
    g = Graph.build(["a", "b"], [SEQUENCE, SEQUENCE], [[(0, 1)]])
    assert any("edge-type arity" in v for v in validate_graph(g, 2).violations)


def test_validate_reports_non_contiguous_prefix():
    g = Graph.build(["a", "b", "c"], [SEQUENCE, SUPPLEMENTARY, SEQUENCE], [[]])
    assert any("non-contiguous" in v for v in validate_graph(g, 1).violations)


def test_flatten_offsets_and_sample_index():
    a = Graph.build(["x", "y"], [SEQUENCE] * 2, [[(0, 1)]])
    b = Graph.build(["p", "q", "r"], [SEQUENCE] * 3, [[(1, 2)]])
    batch = flatten_batch([a, b])
    assert batch.flattened.node_count == 5
    assert batch.node_offsets.tolist() == [0, 2]
    assert batch.sample_index.tolist() == [0, 0, 1, 1, 1]
    assert batch.flattened.edge_lists[0].tolist() == [[0, 1], [3, 4]]


def test_flatten_single_graph_is_identity():
    g = Graph.build(["x", "y", "z"], [SEQUENCE, SEQUENCE, SUPPLEMENTARY], [[(0, 1)], [(2, 0)]])
    batch = flatten_batch([g])
    assert batch.flattened == g
    assert batch.sample_index.tolist() == [0, 0, 0]


def test_flatten_self_loops_reindexed():
    gs = [Graph.build(["a"], [SEQUENCE], [[(0, 0)]]) for _ in range(3)]
    edges = flatten_batch(gs).flattened.edge_lists[0]
    assert {tuple(e) for e in edges.tolist()} == {(0, 0), (1, 1), (2, 2)}


def test_flatten_errors():
    with pytest.raises(GraphError, match="empty minibatch"):
        flatten_batch([])
    a = Graph.build(["a"], [SEQUENCE], [[]])
    b = Graph.build(["a"], [SEQUENCE], [[], []])
    with pytest.raises(GraphError):
        flatten_batch([a, b])


@settings(max_examples=60, deadline=None)
@given(st.lists(graphs(), min_size=1, max_size=6))
def test_flatten_unflatten_roundtrip(gs):
    batch = flatten_batch(gs)
    assert unflatten_batch(batch) == gs
    idx = batch.sample_index
    assert np.all(np.diff(idx) >= 0)
    for e in batch.flattened.edge_lists:
        assert np.all(idx[e[:, 0]] == idx[e[:, 1]])
    assert batch.node_counts.tolist() == [g.node_count for g in gs]


def test_segment_sum_examples():
    np.testing.assert_array_equal(segment_sum([[1.0], [2.0], [3.0]], [0, 0, 1], 2), [[3.0], [3.0]])
    np.testing.assert_array_equal(segment_sum(np.zeros((0, 3)), [], 2), np.zeros((2, 3)))
    np.testing.assert_array_equal(segment_sum([[4.0, 5.0]], [0], 1), [[4.0, 5.0]])
    with pytest.raises(GraphError):
        segment_sum([[1.0]], [2], 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.floats(-10, 10)), min_size=1, max_size=20), st.randoms())
def test_segment_sum_permutation_invariant(items, rnd):
    ids = np.array([i for i, _ in items])
    vals = np.array([v for _, v in items])[:, None]
    perm = list(range(len(items)))
    rnd.shuffle(perm)
    np.testing.assert_allclose(segment_sum(vals, ids, 4), segment_sum(vals[perm], ids[perm], 4), atol=1e-12)


def test_segment_softmax_examples():
    np.testing.assert_allclose(segment_softmax([0.0, 0.0, 0.0], [0, 0, 0], 1), [1 / 3] * 3)
    np.testing.assert_allclose(segment_softmax([math.log(2), 0.0], [0, 0], 1), [2 / 3, 1 / 3])
    np.testing.assert_allclose(segment_softmax([5.0, 5.0], [0, 1], 2), [1.0, 1.0])
    out = segment_softmax([1000.0, 999.0], [0, 0], 1)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [0.7310585786300049, 0.2689414213699951], atol=1e-12)
    with pytest.raises(GraphError):
        segment_softmax([1.0], [3], 2)


def test_segment_softmax_empty_segment_contributes_nothing():
    out = segment_softmax([1.0, 2.0], [0, 0], 3)
    assert out.shape == (2,)
    np.testing.assert_allclose(out.sum(), 1.0)
