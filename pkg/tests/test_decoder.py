import itertools

import numpy as np
import pytest

from structsum import autodiff as ad
from structsum.batching import ExtendedVocabMap, make_batch
from structsum.decoder import (
    beam_decode,
    beam_search,
    copy_distribution,
    decode_step,
    greedy_decode,
    initial_state,
    model_step_fn,
    sequence_score,
    teacher_forced,
)
from structsum.encoder import encode
from structsum.nn import ShapeError
from structsum.verify import MICRO_WORDS, micro_problem
from structsum.vocab import BOS_ID, EOS_ID, UNK_ID, Vocabulary


def _evm(ext_ids, segment, base, extended):
    return ExtendedVocabMap(base, np.asarray(ext_ids), np.asarray(segment), extended, [{}])


def test_copy_distribution_boundaries():
    logits = np.array([[0.0, 1.0, 2.0, 3.0]])
    attn = np.array([0.25, 0.75])
    evm = _evm([1, 4], [0, 0], 4, 6)
    soft = np.exp(logits[0]) / np.exp(logits[0]).sum()
    gen_only = copy_distribution(logits, attn, np.array([[1.0]]), evm).value[0]
    np.testing.assert_allclose(gen_only, np.concatenate([soft, [0, 0]]))
    copy_only = copy_distribution(logits, attn, np.array([[0.0]]), evm).value[0]
    np.testing.assert_allclose(copy_only, [0, 0.25, 0, 0, 0.75, 0])


def test_copy_distribution_hand_case():
    # Uniform over 4 words, source "a b" where a is in vocabulary (id 2) and b is OOV.
    evm = _evm([2, 4], [0, 0], 4, 6)
    dist = copy_distribution(np.zeros((1, 4)), np.array([0.4, 0.6]), np.array([[0.5]]), evm).value[0]
    np.testing.assert_allclose(dist, [0.125, 0.125, 0.125 + 0.2, 0.125, 0.3, 0.0])
    assert dist.sum() == pytest.approx(1.0)


def test_copy_distribution_repeated_source_token_accumulates():
    evm = _evm([5, 5, 5], [0, 0, 0], 4, 8)
    dist = copy_distribution(np.zeros((1, 4)), np.array([0.2, 0.3, 0.5]), np.array([[0.0]]), evm).value[0]
    assert dist[5] == pytest.approx(1.0)


def test_copy_distribution_sums_to_one_and_is_monotone(rng):
    for _ in range(50):
        b, v, n = 2, 5, 7
        seg = np.sort(rng.integers(0, b, n))
        seg[:b] = np.arange(b)
        seg.sort()
        ext = rng.integers(0, v + 3, n)
        evm = _evm(ext, seg, v, v + 3)
        logits = rng.normal(size=(b, v))
        attn = np.concatenate([rng.dirichlet(np.ones((seg == s).sum())) for s in range(b)])
        p_gen = rng.uniform(size=(b, 1))
        dist = copy_distribution(logits, attn, p_gen, evm).value
        np.testing.assert_allclose(dist.sum(axis=1), 1.0)
        # Raising the logit of a word never lowers its probability.
        w = int(rng.integers(v))
        bumped = logits.copy()
        bumped[:, w] += 1.0
        assert np.all(copy_distribution(bumped, attn, p_gen, evm).value[:, w] >= dist[:, w] - 1e-15)


def test_copy_distribution_shape_error():
    with pytest.raises(ShapeError):
        copy_distribution(np.zeros((1, 3)), np.array([1.0]), np.array([[0.5]]), _evm([0], [0], 4, 5))


def _single(seed):
    batch, cfg, params = micro_problem(seed)
    vocab = Vocabulary(MICRO_WORDS)
    one = make_batch(batch.samples[:1], vocab, dtype=np.float64)
    with ad.no_grad():
        encoded = encode(one, cfg, params)
    return one, cfg, params, encoded


def test_decode_step_with_single_memory_attends_fully():
    one, cfg, params, encoded = _single(0)
    mem = encoded.memories.value[:1]
    state = initial_state(encoded)
    _, _, weights, _ = decode_step(state, params["embed.token"][[BOS_ID]], mem, [0], params)
    np.testing.assert_allclose(weights.value, [1.0])


def test_decode_step_zero_output_projection_gives_uniform_logits():
    one, cfg, params, encoded = _single(1)
    params["decoder.out.W"] = 0.0
    params["decoder.out.b"] = 0.0
    _, logits, _, _ = decode_step(initial_state(encoded), params["embed.token"][[BOS_ID]], encoded.memories, one.memory_segment, params)
    np.testing.assert_array_equal(logits.value, 0.0)


def test_decode_step_without_copy_has_unit_gate():
    one, cfg, params, encoded = _single(2)
    _, _, _, p_gen = decode_step(initial_state(encoded), params["embed.token"][[BOS_ID]], encoded.memories, one.memory_segment, params, copy=False)
    np.testing.assert_array_equal(p_gen.value, 1.0)


def test_greedy_stops_immediately_when_eos_dominates():
    one, cfg, params, encoded = _single(3)
    params["decoder.out.b"][EOS_ID] = 1e3
    params["decoder.gen.b"] = 1e3
    assert greedy_decode(encoded, one.evm, 10, params, cfg) == [[]]


def test_greedy_max_len_one():
    one, cfg, params, encoded = _single(4)
    params["decoder.out.b"][EOS_ID] = -1e3
    out = greedy_decode(encoded, one.evm, 1, params, cfg)
    assert len(out[0]) == 1
    with pytest.raises(ValueError):
        greedy_decode(encoded, one.evm, 0, params, cfg)


@pytest.mark.parametrize("seed", range(10))
def test_greedy_is_per_step_argmax(seed):
    one, cfg, params, encoded = _single(seed)
    max_len = 6
    out = greedy_decode(encoded, one.evm, max_len, params, cfg)[0]
    steps = out + ([EOS_ID] if len(out) < max_len else [])
    inputs = np.array([[BOS_ID] + [t if t < one.evm.base_size else UNK_ID for t in steps[:-1]]])
    with ad.no_grad():
        dists = teacher_forced(encoded, one.evm, inputs, cfg, params)
    for tok, dist in zip(steps, dists):
        assert int(np.argmax(dist.value[0])) == tok


def test_greedy_batch_matches_single_samples():
    batch, cfg, params = micro_problem(7)
    with ad.no_grad():
        joint = greedy_decode(encode(batch, cfg, params), batch.evm, 5, params, cfg)
    vocab = Vocabulary(MICRO_WORDS)
    for i, s in enumerate(batch.samples):
        one = make_batch([s], vocab, dtype=np.float64)
        with ad.no_grad():
            single = greedy_decode(encode(one, cfg, params), one.evm, 5, params, cfg)[0]
        # Copy ids depend only on the sample's own source positions.
        assert joint[i] == single


@pytest.mark.parametrize("seed", range(50))
def test_beam_width_one_equals_greedy(seed):
    one, cfg, params, encoded = _single(seed)
    assert beam_decode(encoded, one.evm, 1, 6, params, cfg) == greedy_decode(encoded, one.evm, 6, params, cfg)[0]


@pytest.mark.parametrize("seed", range(20))
def test_wider_beam_never_scores_below_greedy(seed):
    one, cfg, params, encoded = _single(seed)
    step = model_step_fn(encoded, one.evm, params, cfg)
    init = initial_state(encoded)
    greedy = greedy_decode(encoded, one.evm, 6, params, cfg)[0]
    beam = beam_decode(encoded, one.evm, 5, 6, params, cfg)
    assert sequence_score(step, init, beam, 6) >= sequence_score(step, init, greedy, 6) - 1e-12


def _toy_step_fn(seed, vocab_size=4):
    """Deterministic step function whose distribution depends on the whole prefix."""

    def step(state, prev):
        prefix = state + (prev,)
        rng = np.random.default_rng([seed, *prefix])
        p = rng.dirichlet(np.ones(vocab_size) * 0.7)
        return np.log(p), prefix

    return step


def _exhaustive(step, max_len, vocab_size=4, bos=0, eos=1):
    best = None
    for length in range(1, max_len + 1):
        for seq in itertools.product(range(vocab_size), repeat=length):
            if eos in seq[:-1] or (length < max_len and seq[-1] != eos):
                continue
            tokens = list(seq[:-1]) if seq[-1] == eos else list(seq)
            score = sequence_score(step, (), tokens, max_len, bos=bos, eos=eos)
            if best is None or score > best[1]:
                best = (tokens, score)
    return best


@pytest.mark.parametrize("seed", range(20))
def test_wide_beam_matches_exhaustive_search(seed):
    step = _toy_step_fn(seed)
    tokens, score = beam_search(step, (), 64, 3, bos=0, eos=1)
    best_tokens, best_score = _exhaustive(step, 3)
    assert score == pytest.approx(best_score, abs=1e-12)
    assert tokens == best_tokens


def test_beam_search_score_matches_sequence_score():
    step = _toy_step_fn(99)
    tokens, score = beam_search(step, (), 3, 4, bos=0, eos=1)
    assert sequence_score(step, (), tokens, 4, bos=0, eos=1) == pytest.approx(score, abs=1e-12)
    with pytest.raises(ValueError):
        beam_search(step, (), 0, 4)
