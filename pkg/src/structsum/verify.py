"""Gradient verification of the full model on tiny random instances."""

from __future__ import annotations

import numpy as np

from .batching import SummarySample, make_batch
from .config import ModelConfig, init_parameters
from .graph import SEQUENCE, SUPPLEMENTARY, Graph
from .model import batch_loss
from .nn import GradCheckReport, gradient_check
from .vocab import Vocabulary

MICRO_WORDS = ["get", "set", "value", "name", "add", "item"]
MICRO_RARE = ["zorp", "quux", "blat"]  # never in the vocabulary, reachable only by copying


def micro_config(vocab_size: int, encoder: str = "seq+gnn") -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size,
        edge_types=3,
        embedding_dim=5,
        encoder_hidden=3,
        gnn_hidden=4,
        timesteps=2,
        decoder_hidden=6,
        encoder=encoder,
    )


def random_micro_graph(rng: np.random.Generator, edge_types: int = 3) -> Graph:
    words = MICRO_WORDS + MICRO_RARE
    n_seq = int(rng.integers(2, 6))
    n_sup = int(rng.integers(0, 3))
    labels = [words[i] for i in rng.integers(0, len(words), n_seq)]
    labels += [MICRO_WORDS[i] + "Node" for i in rng.integers(0, len(MICRO_WORDS), n_sup)]
    kinds = [SEQUENCE] * n_seq + [SUPPLEMENTARY] * n_sup
    n = n_seq + n_sup
    edges = [[(i, i + 1) for i in range(n_seq - 1)]]
    for _ in range(edge_types - 1):
        m = int(rng.integers(0, 2 * n))
        edges.append([tuple(int(x) for x in rng.integers(0, n, 2)) for _ in range(m)])
    names = [f"type{k}" for k in range(edge_types)]
    return Graph.build(labels, kinds, edges, names)


def micro_problem(seed: int, encoder: str = "seq+gnn"):
    """A random two-sample batch, a micro configuration and 64-bit parameters."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary(MICRO_WORDS)
    samples = []
    for i in range(2):
        g = random_micro_graph(rng)
        source = list(g.node_labels[: g.sequence_length])
        target = [source[j] if rng.random() < 0.5 else MICRO_WORDS[int(rng.integers(len(MICRO_WORDS)))] for j in rng.integers(0, len(source), int(rng.integers(1, 4)))]
        samples.append(SummarySample(g, target, id=str(i)))
    cfg = micro_config(len(vocab), encoder)
    params = init_parameters(cfg, seed=seed, dtype=np.float64)
    # Non-zero biases so their gradients are exercised too.
    params.data[:] += rng.normal(0.0, 0.1, params.size)
    return make_batch(samples, vocab, dtype=np.float64), cfg, params


def micro_gradient_check(seed: int, num_samples: int | None = 60, tolerance: float = 1e-4, encoder: str = "seq+gnn") -> GradCheckReport:
    batch, cfg, params = micro_problem(seed, encoder)
    return gradient_check(
        lambda p: batch_loss(batch, cfg, p),
        params,
        tolerance=tolerance,
        num_samples=num_samples,
        rng=np.random.default_rng(seed + 1),
    )
