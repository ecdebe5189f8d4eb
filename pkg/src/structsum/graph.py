"""Graph containers, minibatch flattening and segment reductions.

Graphs are stored sparsely: one ``(E, 2)`` integer array of
``(source, target)`` pairs per edge type.  Sequence-token nodes always occupy
a contiguous prefix of the node indices, in input order; every other node is
*supplementary* (identifier, syntax, sentence or entity nodes).

A minibatch is merged into a single graph with one disconnected component
per sample (:func:`flatten_batch`).  Per-sample reductions over such a batch
are expressed with :func:`segment_sum` and :func:`segment_softmax`, which
never require padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SEQUENCE = 0
SUPPLEMENTARY = 1

KIND_NAMES = {SEQUENCE: "seq", SUPPLEMENTARY: "sup"}
KIND_CODES = {name: code for code, name in KIND_NAMES.items()}


class GraphError(ValueError):
    """Raised for malformed graphs or batches."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_edges(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        arr = np.zeros((0, 2), dtype=np.int64)
    return arr.reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class Graph:
    """A directed multigraph with typed edges and labelled nodes.

    ``edge_lists[k]`` holds the edges of type ``k`` as an ``(E_k, 2)`` array.
    ``node_kinds`` holds :data:`SEQUENCE` or :data:`SUPPLEMENTARY` per node.
    """

    node_count: int
    edge_lists: tuple
    node_labels: tuple
    node_kinds: np.ndarray
    edge_type_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "edge_lists", tuple(_frozen(_as_edges(e)) for e in self.edge_lists))
        object.__setattr__(self, "node_labels", tuple(self.node_labels))
        kinds = np.asarray(self.node_kinds, dtype=np.int8).reshape(-1)
        object.__setattr__(self, "node_kinds", _frozen(kinds))
        object.__setattr__(self, "edge_type_names", tuple(self.edge_type_names))

    @classmethod
    def build(cls, labels: Sequence[str], kinds: Sequence[int], edges: Sequence, names: Sequence[str] = ()):
        return cls(len(labels), tuple(edges), tuple(labels), np.asarray(kinds, dtype=np.int8), tuple(names))

    @property
    def num_edge_types(self) -> int:
        return len(self.edge_lists)

    @property
    def sequence_length(self) -> int:
        """Number of sequence-token nodes (the length of the node prefix)."""
        return int(np.count_nonzero(self.node_kinds == SEQUENCE))

    @property
    def edge_count(self) -> int:
        return int(sum(len(e) for e in self.edge_lists))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.node_labels == other.node_labels
            and np.array_equal(self.node_kinds, other.node_kinds)
            and len(self.edge_lists) == len(other.edge_lists)
            and all(np.array_equal(a, b) for a, b in zip(self.edge_lists, other.edge_lists))
            and self.edge_type_names == other.edge_type_names
        )


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_graph(g: Graph, declared_edge_types: int) -> ValidationReport:
    """Check the structural invariants of ``g``; never raises."""
    report = ValidationReport()
    if declared_edge_types < 1:
        report.violations.append("edge-type arity: declared K must be >= 1")
    if len(g.edge_lists) != declared_edge_types:
        report.violations.append(
            f"edge-type arity: expected {declared_edge_types} edge lists, got {len(g.edge_lists)}"
        )
    if len(g.node_labels) != g.node_count or len(g.node_kinds) != g.node_count:
        report.violations.append("node arity: labels/kinds do not match node_count")
    for k, edges in enumerate(g.edge_lists):
        if len(edges) and (edges.min() < 0 or edges.max() >= g.node_count):
            report.violations.append(f"endpoint out of range in edge type {k}")
    kinds = g.node_kinds
    n_seq = int(np.count_nonzero(kinds == SEQUENCE))
    if not np.all(kinds[:n_seq] == SEQUENCE):
        report.violations.append("non-contiguous sequence prefix")
    if np.any((kinds != SEQUENCE) & (kinds != SUPPLEMENTARY)):
        report.violations.append("unknown node kind")
    return report


@dataclass(frozen=True, eq=False)
class BatchedGraph:
    """Several graphs merged into one graph of disconnected components."""

    flattened: Graph
    sample_index: np.ndarray
    node_offsets: np.ndarray
    sample_count: int

    def __post_init__(self):
        object.__setattr__(self, "sample_index", _frozen(np.asarray(self.sample_index, dtype=np.int64)))
        object.__setattr__(self, "node_offsets", _frozen(np.asarray(self.node_offsets, dtype=np.int64)))

    @property
    def node_counts(self) -> np.ndarray:
        return np.diff(np.append(self.node_offsets, self.flattened.node_count))

    def sequence_mask(self) -> np.ndarray:
        return self.flattened.node_kinds == SEQUENCE


def flatten_batch(graphs: Sequence[Graph]) -> BatchedGraph:
    """Merge ``graphs`` into one graph, shifting node indices per sample.

    The sequence-prefix invariant holds per sample, not for the merged graph:
    sample ``i`` owns nodes ``node_offsets[i] : node_offsets[i+1]``.
    """
    if len(graphs) == 0:
        raise GraphError("empty minibatch")
    k = graphs[0].num_edge_types
    if any(g.num_edge_types != k for g in graphs):
        raise GraphError("all graphs in a minibatch must share the same number of edge types")
    sizes = np.array([g.node_count for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    edges = [
        np.concatenate([g.edge_lists[t] + off for g, off in zip(graphs, offsets)], axis=0)
        for t in range(k)
    ]
    labels = [lab for g in graphs for lab in g.node_labels]
    kinds = np.concatenate([g.node_kinds for g in graphs])
    flat = Graph(int(sizes.sum()), tuple(edges), tuple(labels), kinds, graphs[0].edge_type_names)
    sample_index = np.repeat(np.arange(len(graphs), dtype=np.int64), sizes)
    return BatchedGraph(flat, sample_index, offsets, len(graphs))


def unflatten_batch(batch: BatchedGraph) -> list:
    """Inverse of :func:`flatten_batch`."""
    flat = batch.flattened
    bounds = np.append(batch.node_offsets, flat.node_count)
    out = []
    for i in range(batch.sample_count):
        lo, hi = int(bounds[i]), int(bounds[i + 1])
        edges = []
        for e in flat.edge_lists:
            sel = (e[:, 0] >= lo) & (e[:, 0] < hi)
            edges.append(e[sel] - lo)
        out.append(
            Graph(hi - lo, tuple(edges), flat.node_labels[lo:hi], flat.node_kinds[lo:hi].copy(), flat.edge_type_names)
        )
    return out


def _check_segments(n: int, segment_ids, segment_count: int) -> np.ndarray:
    ids = np.asarray(segment_ids, dtype=np.int64).reshape(-1)
    if len(ids) != n:
        raise GraphError(f"segment_ids has length {len(ids)}, expected {n}")
    if len(ids) and (ids.min() < 0 or ids.max() >= segment_count):
        raise GraphError("segment id out of range")
    return ids


def segment_sum(values, segment_ids, segment_count: int) -> np.ndarray:
    """Sum the rows of ``values`` into ``segment_count`` buckets.

    Empty segments yield zero rows.

    >>> segment_sum([[1.0], [2.0], [3.0]], [0, 0, 1], 2).tolist()
    [[3.0], [3.0]]
    """
    values = np.asarray(values, dtype=float) if not isinstance(values, np.ndarray) else values
    ids = _check_segments(len(values), segment_ids, segment_count)
    out = np.zeros((segment_count,) + values.shape[1:], dtype=values.dtype if values.size else float)
    np.add.at(out, ids, values)
    return out


def segment_max(values: np.ndarray, segment_ids, segment_count: int) -> np.ndarray:
    ids = _check_segments(len(values), segment_ids, segment_count)
    out = np.full((segment_count,) + values.shape[1:], -np.inf, dtype=values.dtype)
    np.maximum.at(out, ids, values)
    return out


def segment_softmax(logits, segment_ids, segment_count: int) -> np.ndarray:
    """Softmax of a flat vector of scalars, computed independently per segment.

    The per-segment maximum is subtracted before exponentiation, so logits of
    any finite magnitude are safe.
    """
    logits = np.asarray(logits, dtype=float) if not isinstance(logits, np.ndarray) else logits
    ids = _check_segments(len(logits), segment_ids, segment_count)
    if len(logits) == 0:
        return logits.copy()
    shifted = np.exp(logits - segment_max(logits, ids, segment_count)[ids])
    totals = np.zeros(segment_count, dtype=shifted.dtype)
    np.add.at(totals, ids, shifted)
    return shifted / totals[ids]
