"""Sequence-GNN encoder.

A bidirectional LSTM produces per-token vectors; projected to the GNN width
they seed the sequence-token nodes of the graph, while supplementary nodes
are seeded from label embeddings.  A gated graph neural network then
propagates for ``T`` steps, and a gated sum over the final node states gives
a graph vector that is fused with the sequence vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .batching import Batch, PropagationPlan, propagation_plan
from .config import GnnConfig, ModelConfig
from .graph import BatchedGraph, Graph
from .nn import Parameters, ShapeError, bidirectional_encode, linear


@dataclass
class EncoderOutput:
    per_token_initial: Var | None  # e_i, (n_tokens, 2 * encoder_hidden); None without a sequence encoder
    per_node_final: Var  # (n_nodes, gnn_hidden)
    sequence_initial: Var  # e, (B, 2 * encoder_hidden)
    graph_readout: Var  # (B, gnn_hidden)
    fused: Var  # (B, decoder_hidden)
    memories: Var  # final states of sequence-token nodes, (n_tokens, gnn_hidden)
    memory_segment: np.ndarray


def _plan(g) -> PropagationPlan:
    if isinstance(g, PropagationPlan):
        return g
    if isinstance(g, BatchedGraph):
        g = g.flattened
    if isinstance(g, Graph):
        return propagation_plan(g)
    raise TypeError("expected a Graph, BatchedGraph or PropagationPlan")


def ggnn_propagate(g, initial_states, cfg: GnnConfig, params: Parameters) -> Var:
    """Run ``cfg.timesteps`` rounds of gated message passing.

    Each round, every edge ``u -> v`` of type ``k`` sends ``f_k(h_u)`` (a
    linear layer with bias) to ``v``, and the reversed edge sends
    ``f_{K+k}(h_v)`` to ``u``.  Messages are summed per receiving node (zero
    when there are none) and fed with the current state into a GRU.
    """
    plan = _plan(g)
    states = ad.as_var(initial_states)
    n, h = states.value.shape if states.value.ndim == 2 else (0, 0)
    if n != plan.node_count or h != cfg.hidden_dim:
        raise ShapeError(f"ggnn_propagate: expected ({plan.node_count}, {cfg.hidden_dim}) states")
    if plan.edge_types != cfg.effective_edge_types:
        raise ShapeError("ggnn_propagate: graph edge types do not match the configuration")
    if cfg.timesteps == 0:
        return states
    edge_w, edge_b = params.var("gnn.edge.W"), params.var("gnn.edge.b")
    gru_w, gru_u, gru_b = params.var("gnn.gru.W"), params.var("gnn.gru.U"), params.var("gnn.gru.b")
    routing = plan.routing.astype(states.value.dtype)
    bias_msgs = ad.matmul(plan.in_degree.astype(states.value.dtype), edge_b)
    for _ in range(cfg.timesteps):
        outgoing = ad.reshape(ad.matmul(states, edge_w), (n * plan.edge_types, h))
        messages = ad.add(ad.spmm(routing, outgoing), bias_msgs)
        states = ad.gru_cell(messages, states, gru_w, gru_u, gru_b)
    return states


def seed_node_states(batch: Batch, per_token, params: Parameters, project: bool = True) -> Var:
    """Initial GNN states in node order.

    Sequence-token nodes get ``per_token`` (projected to the GNN width when
    ``project``); supplementary nodes get the mean embedding of their label
    ids.
    """
    per_token = ad.as_var(per_token)
    if per_token.value.shape[0] != len(batch.seq_nodes):
        raise ShapeError("seed_node_states: one vector per sequence token is required")
    seq = linear(per_token, params.var("gnn.seed.W"), params.var("gnn.seed.b")) if project else per_token
    if len(batch.sup_nodes) == 0:
        return seq
    sup = ad.spmm(batch.sup_embedding.astype(seq.value.dtype), params.var("embed.node"))
    return ad.gather_rows(ad.concat([seq, sup], axis=0), batch.node_order)


def graph_readout(node_states, sample_index, sample_count: int, params: Parameters, mode: str = "gated") -> Var:
    """Per-sample graph vector.

    ``gated``: ``sum_v sigmoid(w(h_v)) * proj(h_v)``; ``average``: the mean
    node state of each sample.
    """
    node_states = ad.as_var(node_states)
    sample_index = np.asarray(sample_index, dtype=np.int64)
    counts = np.bincount(sample_index, minlength=sample_count)[:sample_count]
    if np.any(counts == 0):
        raise ShapeError("graph_readout: a sample has no nodes")
    if mode == "average":
        total = ad.segment_sum(node_states, sample_index, sample_count)
        return ad.mul(total, (1.0 / counts).astype(node_states.value.dtype)[:, None])
    if mode != "gated":
        raise ValueError(f"unknown readout mode {mode!r}")
    gate = ad.sigmoid(linear(node_states, params.var("readout.gate.W"), params.var("readout.gate.b")))
    proj = linear(node_states, params.var("readout.proj.W"), params.var("readout.proj.b"))
    return ad.segment_sum(ad.mul(gate, proj), sample_index, sample_count)


def encode(batch: Batch, cfg: ModelConfig, params: Parameters) -> EncoderOutput:
    dtype = params.dtype
    b = batch.size
    sample_index = batch.graph.sample_index
    if cfg.encoder == "gnn":
        per_token = None
        sequence = Var(np.zeros((b, 2 * cfg.encoder_hidden), dtype=dtype))
        seeds = seed_node_states(batch, ad.gather_rows(params.var("embed.node"), batch.token_ids), params, project=False)
    else:
        embedded = ad.gather_rows(params.var("embed.token"), batch.token_ids)
        per_token, sequence = bidirectional_encode(
            embedded,
            batch.lengths,
            (params.var("encoder.fwd.W"), params.var("encoder.fwd.b")),
            (params.var("encoder.bwd.W"), params.var("encoder.bwd.b")),
        )
        seeds = seed_node_states(batch, per_token, params)

    if cfg.encoder == "seq":
        final = seeds
        readout = Var(np.zeros((b, cfg.gnn_hidden), dtype=dtype))
    else:
        final = ggnn_propagate(batch.plan, seeds, cfg.gnn, params)
        readout = graph_readout(final, sample_index, b, params, cfg.readout)
    fused = ad.matmul(ad.concat([sequence, readout], axis=1), params.var("fuse.W"))
    memories = ad.gather_rows(final, batch.seq_nodes)
    return EncoderOutput(per_token, final, sequence, readout, fused, memories, batch.memory_segment)
