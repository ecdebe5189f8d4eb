import math

import numpy as np
import pytest

from structsum import autodiff as ad
from structsum.autodiff import Var
from structsum.model import SeqGnnModel, vocabulary_for
from structsum.training import Adam, TrainConfig, TrainingError, clip_global_norm, sequence_loss, train
from structsum.verify import micro_config, micro_problem


def test_sequence_loss_perfect_prediction_is_zero():
    dists = [Var(np.array([[0.0, 1.0, 0.0]])), Var(np.array([[0.0, 0.0, 1.0]]))]
    assert float(sequence_loss(dists, [[1, 2]]).value) == 0.0


def test_sequence_loss_uniform_is_log_size():
    e = 7
    dists = [Var(np.full((2, e), 1 / e)) for _ in range(3)]
    assert float(sequence_loss(dists, np.zeros((2, 3), dtype=int)).value) == pytest.approx(math.log(e))


def test_sequence_loss_two_step_hand_case():
    dists = [Var(np.array([[0.5, 0.25, 0.25]])), Var(np.array([[0.1, 0.2, 0.7]]))]
    expected = (-math.log(0.5) - math.log(0.7)) / 2
    assert float(sequence_loss(dists, [[0, 2]]).value) == pytest.approx(expected)


def test_sequence_loss_mask_and_floor():
    dists = [Var(np.array([[0.5, 0.5], [1.0, 0.0]])), Var(np.array([[0.25, 0.75], [0.0, 1.0]]))]
    mask = np.array([[True, True], [True, False]])
    expected = (-math.log(0.5) - math.log(0.75) - math.log(1e-12)) / 3
    assert float(sequence_loss(dists, [[0, 1], [1, 0]], mask).value) == pytest.approx(expected)


def test_sequence_loss_errors():
    d = [Var(np.full((1, 2), 0.5))]
    with pytest.raises(ValueError):
        sequence_loss(d, [[0, 1]])
    with pytest.raises(ValueError):
        sequence_loss([], np.zeros((1, 0), dtype=int))
    with pytest.raises(ValueError):
        sequence_loss(d, [[0], [1]])


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(clip_norm=0)


def test_clip_global_norm():
    g = np.array([3.0, 4.0])
    assert clip_global_norm(g, 1.0) == 5.0
    np.testing.assert_allclose(g, [0.6, 0.8])
    g = np.array([0.3, 0.4])
    clip_global_norm(g, 1.0)
    np.testing.assert_array_equal(g, [0.3, 0.4])


def test_adam_first_step_moves_by_learning_rate():
    data = np.array([1.0, -1.0])
    Adam(2, TrainConfig(learning_rate=0.1)).step(data, np.array([2.0, -0.5]))
    np.testing.assert_allclose(data, [0.9, -0.9], atol=1e-6)


def _micro_samples(seed=0):
    batch, _, _ = micro_problem(seed)
    return batch.samples


def _micro_model(samples, seed=0):
    vocab = vocabulary_for(samples)
    return SeqGnnModel(micro_config(len(vocab)), vocab, seed=seed, dtype=np.float64)


def test_zero_learning_rate_leaves_parameters_unchanged():
    samples = _micro_samples()
    model = _micro_model(samples)
    before = model.params.data.copy()
    train(samples, None, TrainConfig(learning_rate=0.0, epochs=1, batch_size=1), model=model)
    np.testing.assert_array_equal(model.params.data, before)


def test_single_sample_loss_decreases():
    samples = _micro_samples(1)[:1]
    model = _micro_model(samples)
    initial = float(model.loss(model.batch(samples)).value)
    train(samples, None, TrainConfig(learning_rate=1e-2, epochs=200, batch_size=1), model=model)
    with ad.no_grad():
        final = float(model.loss(model.batch(samples)).value)
    assert final < initial


def test_training_is_bit_reproducible_in_64_bit():
    samples = _micro_samples(2) + _micro_samples(3)
    runs = []
    for _ in range(2):
        result = train(samples, micro_config(1), TrainConfig(epochs=3, batch_size=2, seed=5), dtype=np.float64)
        runs.append((result.model.params.data.tobytes(), [h.loss for h in result.history]))
    assert runs[0] == runs[1]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts_with_diagnostics():
    samples = _micro_samples()
    model = _micro_model(samples)
    model.params.data[:] = np.nan
    with pytest.raises(TrainingError, match="non-finite loss"):
        train(samples, None, TrainConfig(epochs=1), model=model)


def test_empty_dataset_raises():
    with pytest.raises(ValueError):
        train([], micro_config(1))


def test_validation_metrics_are_logged():
    samples = _micro_samples(4)
    result = train(samples, micro_config(1), TrainConfig(epochs=2, batch_size=2), validation=samples, dtype=np.float64, max_len=4)
    assert len(result.history) == 2
    assert 0.0 <= result.history[-1].validation.f1 <= 1.0
    assert "validation" in result.history[-1].as_dict()


def test_stop_when_ends_early():
    samples = _micro_samples(5)
    result = train(samples, micro_config(1), TrainConfig(epochs=10), dtype=np.float64, stop_when=lambda log: log.epoch == 3)
    assert [h.epoch for h in result.history] == [1, 2, 3]
