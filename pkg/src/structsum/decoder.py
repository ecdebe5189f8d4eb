"""LSTM decoder with attention and a pointer-style copy mechanism.

At every step the decoder LSTM reads the previous token embedding together
with the previous attention context (input feeding), attends over the
encoder states of the sequence-token nodes, and mixes a vocabulary softmax
with the attention distribution through a learned gate ``p_gen``::

    P(w) = p_gen * softmax(logits)[w] + (1 - p_gen) * sum_{j: ext(j) = w} a_j

Distributions live in the *extended* vocabulary: base ids followed by one
id per out-of-vocabulary source position (see
:class:`~structsum.batching.ExtendedVocabMap`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .batching import ExtendedVocabMap
from .config import ModelConfig
from .encoder import EncoderOutput
from .nn import Parameters, ShapeError, attention, linear, lstm_cell
from .vocab import BOS_ID, EOS_ID, UNK_ID

PROB_FLOOR = 1e-12


@dataclass
class DecodeState:
    h: Var
    c: Var
    context: Var
    step: int = 0


def initial_state(encoded: EncoderOutput) -> DecodeState:
    """``h`` starts from the fused encoder vector, ``c`` and the context at zero."""
    fused = encoded.fused
    b = fused.value.shape[0]
    dtype = fused.value.dtype
    width = encoded.memories.value.shape[1]
    return DecodeState(fused, Var(np.zeros_like(fused.value)), Var(np.zeros((b, width), dtype=dtype)))


def decode_step(state: DecodeState, prev_embedding, memories, segment, params: Parameters, keys=None, copy: bool = True):
    """One decoder step; returns ``(state, vocab_logits, attention_weights, p_gen)``."""
    x = ad.concat([ad.as_var(prev_embedding), state.context], axis=1)
    if x.value.shape[0] != state.h.value.shape[0]:
        raise ShapeError("decode_step: one previous token per sample is required")
    h, c = lstm_cell(x, state.h, state.c, params.var("decoder.lstm.W"), params.var("decoder.lstm.b"))
    context, weights = attention(h, memories, segment, params.var("decoder.attn.W"), keys=keys)
    logits = linear(ad.concat([h, context], axis=1), params.var("decoder.out.W"), params.var("decoder.out.b"))
    if copy:
        gate_in = ad.concat([context, h, x], axis=1)
        p_gen = ad.sigmoid(linear(gate_in, params.var("decoder.gen.W"), params.var("decoder.gen.b")))
    else:
        p_gen = Var(np.ones((h.value.shape[0], 1), dtype=h.value.dtype))
    return DecodeState(h, c, context, state.step + 1), logits, weights, p_gen


def copy_distribution(vocab_logits, attention_weights, p_gen, evm: ExtendedVocabMap) -> Var:
    """Mix the generation and copy distributions over extended ids, ``(B, E)``."""
    vocab_logits, attention_weights, p_gen = (ad.as_var(v) for v in (vocab_logits, attention_weights, p_gen))
    b, v = vocab_logits.value.shape
    if v != evm.base_size or len(attention_weights.value) != len(evm.ext_ids):
        raise ShapeError("copy_distribution: inputs do not match the extended vocabulary map")
    e = evm.extended_size
    dtype = vocab_logits.value.dtype
    generated = ad.mul(ad.softmax_rows(vocab_logits), p_gen)
    if e > v:
        generated = ad.concat([generated, Var(np.zeros((b, e - v), dtype=dtype))], axis=1)
    copy_gate = ad.sub(np.ones(1, dtype=dtype), ad.reshape(ad.gather_rows(p_gen, evm.segment), (-1,)))
    copied = ad.segment_sum(ad.mul(attention_weights, copy_gate), evm.segment * e + evm.ext_ids, b * e)
    return ad.add(generated, ad.reshape(copied, (b, e)))


def memory_keys(encoded: EncoderOutput, params: Parameters) -> Var:
    return ad.matmul(encoded.memories, params.var("decoder.attn.W"))


def teacher_forced(encoded: EncoderOutput, evm: ExtendedVocabMap, inputs: np.ndarray, cfg: ModelConfig, params: Parameters):
    """Extended distributions for every step of ``inputs`` (``(B, T)`` base ids)."""
    state = initial_state(encoded)
    keys = memory_keys(encoded, params)
    embed = params.var("embed.token")
    dists = []
    for t in range(inputs.shape[1]):
        prev = ad.gather_rows(embed, inputs[:, t])
        state, logits, weights, p_gen = decode_step(state, prev, encoded.memories, evm.segment, params, keys, cfg.copy)
        dists.append(copy_distribution(logits, weights, p_gen, evm))
    return dists


def greedy_decode(encoded: EncoderOutput, evm: ExtendedVocabMap, max_len: int, params: Parameters, cfg: ModelConfig) -> list:
    """Per-step argmax decoding for a whole batch.

    Ties go to the lowest extended id.  Each returned sequence excludes EOS
    and has at most ``max_len`` tokens.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    b = encoded.fused.value.shape[0]
    out = [[] for _ in range(b)]
    done = np.zeros(b, dtype=bool)
    with ad.no_grad():
        state = initial_state(encoded)
        keys = memory_keys(encoded, params)
        embed = params["embed.token"]
        prev = np.full(b, BOS_ID)
        for _ in range(max_len):
            state, logits, weights, p_gen = decode_step(state, embed[prev], encoded.memories, evm.segment, params, keys, cfg.copy)
            nxt = np.argmax(copy_distribution(logits, weights, p_gen, evm).value, axis=1)
            for i in np.flatnonzero(~done):
                if nxt[i] == EOS_ID:
                    done[i] = True
                else:
                    out[i].append(int(nxt[i]))
            if done.all():
                break
            prev = np.where(nxt < evm.base_size, nxt, UNK_ID)
    return out


# -- beam search ---------------------------------------------------------------


def _normalised(logp: float, length: int) -> float:
    return logp / max(length, 1)


def beam_search(step_fn: Callable, init_state, beam_width: int, max_len: int, bos: int = BOS_ID, eos: int = EOS_ID):
    """Length-normalised beam search.

    ``step_fn(state, prev_token) -> (log_probs, new_state)``.  Hypotheses end
    at ``eos`` or after ``max_len`` tokens; the score of a hypothesis is its
    total log-probability divided by the number of scored steps.  Returns
    ``(tokens, score)`` with ``eos`` stripped.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    beams = [(0.0, [], init_state, bos)]
    finished = []
    for t in range(max_len):
        candidates = []
        for logp, toks, state, prev in beams:
            lp, new_state = step_fn(state, prev)
            for tok in np.argsort(-lp, kind="stable")[:beam_width]:
                candidates.append((logp + float(lp[tok]), toks + [int(tok)], new_state, int(tok)))
        candidates.sort(key=lambda c: -c[0])
        beams = []
        for cand in candidates[:beam_width]:
            if cand[3] == eos:
                finished.append((_normalised(cand[0], len(cand[1])), cand[1][:-1]))
            elif t == max_len - 1:
                finished.append((_normalised(cand[0], len(cand[1])), cand[1]))
            else:
                beams.append(cand)
        if not beams:
            break
    best = max(finished, key=lambda f: f[0])
    return best[1], best[0]


def sequence_score(step_fn: Callable, init_state, tokens: list, max_len: int, bos: int = BOS_ID, eos: int = EOS_ID) -> float:
    """Length-normalised score of ``tokens`` under the same rules as :func:`beam_search`."""
    seq = list(tokens) + ([eos] if len(tokens) < max_len else [])
    state, prev, total = init_state, bos, 0.0
    for tok in seq:
        lp, state = step_fn(state, prev)
        total += float(lp[tok])
        prev = tok
    return _normalised(total, len(seq))


def model_step_fn(encoded: EncoderOutput, evm: ExtendedVocabMap, params: Parameters, cfg: ModelConfig):
    """Single-sample step function over extended ids, for :func:`beam_search`."""
    keys = memory_keys(encoded, params)
    embed = params["embed.token"]

    def step(state, prev):
        with ad.no_grad():
            tok = prev if prev < evm.base_size else UNK_ID
            state, logits, weights, p_gen = decode_step(state, embed[[tok]], encoded.memories, evm.segment, params, keys, cfg.copy)
            dist = copy_distribution(logits, weights, p_gen, evm).value[0]
        return np.log(np.maximum(dist, PROB_FLOOR)), state

    return step


def beam_decode(encoded: EncoderOutput, evm: ExtendedVocabMap, beam_width: int, max_len: int, params: Parameters, cfg: ModelConfig) -> list:
    """Best sequence for a single-sample batch.

    The greedy hypothesis always competes with the beam's survivors, so a
    wider beam never returns a lower-scoring sequence than greedy decoding.
    """
    if encoded.fused.value.shape[0] != 1:
        raise ShapeError("beam_decode works on one sample at a time")
    with ad.no_grad():
        step = model_step_fn(encoded, evm, params, cfg)
        init = initial_state(encoded)
        tokens, score = beam_search(step, init, beam_width, max_len)
        greedy = greedy_decode(encoded, evm, max_len, params, cfg)[0]
        if greedy != tokens and sequence_score(step, init, greedy, max_len) > score:
            return greedy
    return tokens
