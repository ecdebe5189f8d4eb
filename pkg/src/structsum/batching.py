"""Turning samples into flattened minibatches the model can consume."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .codegraph import split_subtokens
from .graph import SEQUENCE, SUPPLEMENTARY, BatchedGraph, Graph, flatten_batch
from .vocab import BOS_ID, EOS_ID, UNK_ID, Vocabulary


@dataclass
class SummarySample:
    """An input graph whose sequence prefix is the token sequence, plus a target."""

    graph: Graph
    target: list = field(default_factory=list)
    id: str = ""

    @property
    def tokens(self) -> list:
        return list(self.graph.node_labels[: self.graph.sequence_length])


def label_ids(label: str, vocab: Vocabulary, strict: bool = False) -> list:
    """Vocabulary ids used to embed a supplementary node label.

    Labels in the vocabulary map to themselves; anything else (typically a
    full identifier) maps to its subtokens.
    """
    if label in vocab:
        return [vocab.id(label)]
    subs = split_subtokens(label)
    if strict and any(s not in vocab for s in subs):
        raise KeyError(f"unknown node label {label!r}")
    return vocab.ids(subs)


@dataclass
class PropagationPlan:
    """Sparse message-routing structure for one (flattened) graph.

    ``routing[v, u * K_eff + k]`` counts edges ``u -> v`` of effective type
    ``k``; types ``K..2K-1`` are the reversed edges of types ``0..K-1``.
    ``in_degree[v, k]`` counts incoming edges of effective type ``k``.
    """

    node_count: int
    edge_types: int
    routing: sparse.csr_matrix
    in_degree: np.ndarray


def propagation_plan(graph: Graph, dtype=np.float64) -> PropagationPlan:
    n, k = graph.node_count, graph.num_edge_types
    k_eff = 2 * k
    rows, cols, types = [], [], []
    for t, e in enumerate(graph.edge_lists):
        src, dst = e[:, 0], e[:, 1]
        rows += [dst, src]
        cols += [src * k_eff + t, dst * k_eff + k + t]
        types += [np.full(len(e), t), np.full(len(e), k + t)]
    rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    types = np.concatenate(types) if types else np.zeros(0, np.int64)
    routing = sparse.csr_matrix((np.ones(len(rows), dtype=dtype), (rows, cols)), shape=(n, n * k_eff))
    in_degree = np.zeros((n, k_eff), dtype=dtype)
    np.add.at(in_degree, (rows, types), 1.0)
    return PropagationPlan(n, k_eff, routing, in_degree)


@dataclass
class ExtendedVocabMap:
    """Extended ids of the copyable source positions of a batch.

    Position ``j`` (a row of the decoder memory) belongs to sample
    ``segment[j]`` and maps to ``ext_ids[j]``: its vocabulary id, or
    ``base_size + p`` where ``p`` is the first source position holding the
    same out-of-vocabulary token.
    """

    base_size: int
    ext_ids: np.ndarray
    segment: np.ndarray
    extended_size: int
    oov: list  # per sample: {extended id: token}

    def token(self, sample: int, ext_id: int, vocab: Vocabulary) -> str:
        if ext_id < self.base_size:
            return vocab.token(ext_id)
        return self.oov[sample].get(ext_id, vocab.token(UNK_ID))


def extended_vocab_map(sequences: list, vocab: Vocabulary) -> ExtendedVocabMap:
    v = len(vocab)
    ext, seg, oov = [], [], []
    for b, toks in enumerate(sequences):
        first = {}
        table = {}
        for p, tok in enumerate(toks):
            if tok in vocab:
                ext.append(vocab.id(tok))
            else:
                if tok not in first:
                    first[tok] = v + p
                    table[v + p] = tok
                ext.append(first[tok])
            seg.append(b)
        oov.append(table)
    longest = max(len(s) for s in sequences)
    return ExtendedVocabMap(v, np.asarray(ext, dtype=np.int64), np.asarray(seg, dtype=np.int64), v + longest, oov)


def target_ids(target: list, source: list, vocab: Vocabulary) -> list:
    """Extended ids of ``target`` followed by EOS.

    Out-of-vocabulary target tokens found in the source map to their copy id;
    others map to UNK.
    """
    v = len(vocab)
    first = {}
    for p, tok in enumerate(source):
        if tok not in vocab and tok not in first:
            first[tok] = v + p
    return [vocab.id(t) if t in vocab else first.get(t, UNK_ID) for t in target] + [EOS_ID]


@dataclass
class Batch:
    samples: list
    graph: BatchedGraph
    plan: PropagationPlan
    lengths: np.ndarray
    token_ids: np.ndarray
    seq_nodes: np.ndarray
    sup_nodes: np.ndarray
    sup_embedding: sparse.csr_matrix
    node_order: np.ndarray
    evm: ExtendedVocabMap
    targets: np.ndarray  # (B, T) extended ids, EOS-terminated, zero padded
    decoder_inputs: np.ndarray  # (B, T) base ids starting with BOS
    target_mask: np.ndarray  # (B, T)

    @property
    def size(self) -> int:
        return self.graph.sample_count

    @property
    def memory_segment(self) -> np.ndarray:
        return self.evm.segment


def make_batch(samples: list, vocab: Vocabulary, dtype=np.float32) -> Batch:
    bg = flatten_batch([s.graph for s in samples])
    flat = bg.flattened
    kinds = flat.node_kinds
    seq_nodes = np.flatnonzero(kinds == SEQUENCE)
    sup_nodes = np.flatnonzero(kinds == SUPPLEMENTARY)
    labels = flat.node_labels
    sequences = [s.tokens for s in samples]
    lengths = np.array([len(t) for t in sequences], dtype=np.int64)

    rows, cols, vals = [], [], []
    for r, node in enumerate(sup_nodes):
        ids = label_ids(labels[node], vocab)
        rows += [r] * len(ids)
        cols += ids
        vals += [1.0 / len(ids)] * len(ids)
    sup_embedding = sparse.csr_matrix((np.asarray(vals, dtype=dtype), (rows, cols)), shape=(len(sup_nodes), len(vocab)))

    order = np.empty(flat.node_count, dtype=np.int64)
    order[seq_nodes] = np.arange(len(seq_nodes))
    order[sup_nodes] = len(seq_nodes) + np.arange(len(sup_nodes))

    evm = extended_vocab_map(sequences, vocab)
    tgts = [target_ids(s.target, seq, vocab) for s, seq in zip(samples, sequences)]
    steps = max(len(t) for t in tgts)
    targets = np.zeros((len(samples), steps), dtype=np.int64)
    inputs = np.zeros((len(samples), steps), dtype=np.int64)
    mask = np.zeros((len(samples), steps), dtype=bool)
    for b, t in enumerate(tgts):
        targets[b, : len(t)] = t
        mask[b, : len(t)] = True
        prev = [BOS_ID] + [i if i < len(vocab) else UNK_ID for i in t[:-1]]
        inputs[b, : len(prev)] = prev
    return Batch(
        samples, bg, propagation_plan(flat, dtype), lengths, np.asarray(vocab.ids(labels[i] for i in seq_nodes), dtype=np.int64),
        seq_nodes, sup_nodes, sup_embedding, order, evm, targets, inputs, mask,
    )
