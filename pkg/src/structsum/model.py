"""End-to-end model: batching, loss and prediction."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .batching import Batch, SummarySample, label_ids, make_batch
from .codegraph import split_subtokens
from .config import ModelConfig, init_parameters
from .decoder import beam_decode, greedy_decode, teacher_forced
from .encoder import encode
from .graph import SUPPLEMENTARY
from .losses import sequence_loss
from .nn import Parameters
from .vocab import Vocabulary, build_vocab


def batch_loss(batch: Batch, cfg: ModelConfig, params: Parameters) -> Var:
    """Mean negative log-likelihood over all target steps of the batch."""
    encoded = encode(batch, cfg, params)
    dists = teacher_forced(encoded, batch.evm, batch.decoder_inputs, cfg, params)
    return sequence_loss(dists, batch.targets, batch.target_mask)


def vocabulary_for(samples: list, min_count: int = 1, max_size: int | None = None) -> Vocabulary:
    """Vocabulary over source tokens, targets and single-word node labels.

    Multi-subtoken labels (full identifiers) are left out so their nodes are
    embedded as the mean of their subtokens.
    """
    corpus = []
    for s in samples:
        corpus.append(s.tokens)
        corpus.append(list(s.target))
        g = s.graph
        corpus.append(
            [lab for lab, kind in zip(g.node_labels, g.node_kinds) if kind == SUPPLEMENTARY and len(split_subtokens(lab)) <= 1]
        )
    return build_vocab(corpus, min_count=min_count, max_size=max_size)


class SeqGnnModel:
    """A configured model together with its vocabulary and parameters."""

    def __init__(self, cfg: ModelConfig, vocab: Vocabulary, params: Parameters | None = None, seed: int = 0, dtype=np.float32):
        if cfg.vocab_size != len(vocab):
            raise ValueError("config vocab_size does not match the vocabulary")
        self.cfg = cfg
        self.vocab = vocab
        self.params = params if params is not None else init_parameters(cfg, seed=seed, dtype=dtype)

    def batch(self, samples: list) -> Batch:
        return make_batch(samples, self.vocab, dtype=self.params.dtype)

    def loss(self, batch: Batch) -> Var:
        return batch_loss(batch, self.cfg, self.params)

    def encode(self, batch: Batch):
        return encode(batch, self.cfg, self.params)

    def predict_ids(self, samples: list, max_len: int = 20, beam_width: int = 1, batch_size: int = 32) -> list:
        out = []
        with ad.no_grad():
            for i in range(0, len(samples), batch_size if beam_width == 1 else 1):
                chunk = samples[i : i + (batch_size if beam_width == 1 else 1)]
                batch = self.batch(chunk)
                encoded = encode(batch, self.cfg, self.params)
                if beam_width == 1:
                    out.extend(greedy_decode(encoded, batch.evm, max_len, self.params, self.cfg))
                else:
                    out.append(beam_decode(encoded, batch.evm, beam_width, max_len, self.params, self.cfg))
        return out

    def predict(self, samples: list, max_len: int = 20, beam_width: int = 1, batch_size: int = 32) -> list:
        """Decoded token strings per sample (copied OOV tokens restored)."""
        ids = self.predict_ids(samples, max_len, beam_width, batch_size)
        out = []
        for s, seq in zip(samples, ids):
            v = len(self.vocab)
            oov = {}
            for p, tok in enumerate(s.tokens):
                if tok not in self.vocab:
                    oov.setdefault(v + p, tok)
            out.append([self.vocab.token(i) if i < v else oov.get(i, self.vocab.token(1)) for i in seq])
        return out


__all__ = ["SeqGnnModel", "SummarySample", "batch_loss", "label_ids", "vocabulary_for"]
