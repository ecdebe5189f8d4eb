"""Sequence encoders extended with gated graph neural networks.

A bidirectional LSTM reads the token sequence; its per-token outputs seed a
graph neural network over a graph built from the same input (syntax,
data-flow, coreference, ...).  An attentional LSTM decoder with a copy
mechanism then generates the summary.
"""

from .batching import Batch, SummarySample, make_batch
from .config import GnnConfig, ModelConfig, init_parameters, parameter_shapes
from .graph import BatchedGraph, Graph, GraphError, flatten_batch, segment_softmax, segment_sum, unflatten_batch, validate_graph
from .metrics import MetricReport, bleu, corpus_report, f1_subtoken, rouge_l, rouge_n
from .model import SeqGnnModel
from .training import TrainConfig, evaluate, sequence_loss, train
from .vocab import Vocabulary, build_vocab

__version__ = "0.1.0"

__all__ = [
    "Batch", "BatchedGraph", "GnnConfig", "Graph", "GraphError", "MetricReport", "ModelConfig",
    "SeqGnnModel", "SummarySample", "TrainConfig", "Vocabulary", "bleu", "build_vocab", "corpus_report",
    "evaluate", "f1_subtoken", "flatten_batch", "init_parameters", "make_batch", "parameter_shapes",
    "rouge_l", "rouge_n", "segment_softmax", "segment_sum", "sequence_loss", "train", "unflatten_batch",
    "validate_graph",
]
