"""Run an untrained model end to end and verify its gradients."""

import numpy as np

from structsum import autodiff as ad
from structsum.batching import make_batch
from structsum.decoder import beam_decode, greedy_decode
from structsum.encoder import encode
from structsum.verify import MICRO_WORDS, micro_gradient_check, micro_problem
from structsum.vocab import Vocabulary

vocab = Vocabulary(MICRO_WORDS)
batch, cfg, params = micro_problem(seed=0)
print("batch of", batch.size, "graphs with", batch.graph.flattened.node_count, "nodes in total")

with ad.no_grad():
    encoded = encode(batch, cfg, params)
print("fused sequence and graph vectors:", encoded.fused.value.shape)
print("decoder memories (one per token):", encoded.memories.value.shape)

# Greedy decoding over the extended vocabulary; ids past the base size are copies.
ids = greedy_decode(encoded, batch.evm, max_len=5, params=params, cfg=cfg)
for i, seq in enumerate(ids):
    print("sample", i, "source", batch.samples[i].tokens, "->", [batch.evm.token(i, t, vocab) for t in seq])

# Beam search works on one sample at a time.
one = make_batch(batch.samples[:1], vocab, dtype=np.float64)
with ad.no_grad():
    print("beam (width 4):", beam_decode(encode(one, cfg, params), one.evm, 4, 5, params, cfg))

# Analytic gradients against central differences on sampled coordinates.
report = micro_gradient_check(seed=0, num_samples=64)
print(f"gradient check: max relative error {report.max_relative_error:.2e}, passed {report.passed}")
