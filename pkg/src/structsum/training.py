"""Loss, Adam optimisation and the training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .batching import make_batch
from .config import ModelConfig
from .losses import sequence_loss  # noqa: F401  (re-exported)
from .metrics import MetricReport, corpus_report
from .model import SeqGnnModel, vocabulary_for

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-3
    clip_norm: float = 5.0
    epochs: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or self.learning_rate < 0 or self.clip_norm <= 0:
            raise ValueError("TrainConfig values must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.epsilon <= 0:
            raise ValueError("invalid Adam hyperparameters")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    """Adam over a flat parameter vector."""

    def __init__(self, size: int, cfg: TrainConfig, dtype=np.float64):
        self.cfg = cfg
        self.m = np.zeros(size, dtype=dtype)
        self.v = np.zeros(size, dtype=dtype)
        self.t = 0

    def step(self, data: np.ndarray, grad: np.ndarray) -> None:
        c = self.cfg
        self.t += 1
        self.m *= c.beta1
        self.m += (1 - c.beta1) * grad
        self.v *= c.beta2
        self.v += (1 - c.beta2) * grad * grad
        lr = c.learning_rate * np.sqrt(1 - c.beta2**self.t) / (1 - c.beta1**self.t)
        data -= (lr * self.m / (np.sqrt(self.v) + c.epsilon)).astype(data.dtype)


def clip_global_norm(grad: np.ndarray, max_norm: float) -> float:
    """Rescale ``grad`` in place to at most ``max_norm``; returns the pre-clip norm."""
    norm = float(np.sqrt(np.dot(grad.astype(np.float64), grad.astype(np.float64))))
    if norm > max_norm:
        grad *= max_norm / norm
    return norm


@dataclass
class EpochLog:
    epoch: int
    loss: float
    grad_norm: float
    seconds: float
    validation: MetricReport | None = None

    def as_dict(self) -> dict:
        d = {"epoch": self.epoch, "loss": self.loss, "grad_norm": self.grad_norm, "seconds": self.seconds}
        if self.validation is not None:
            d["validation"] = self.validation.as_dict()
        return d


@dataclass
class TrainResult:
    model: SeqGnnModel
    history: list = field(default_factory=list)


def evaluate(model: SeqGnnModel, samples: list, max_len: int = 20, beam_width: int = 1) -> MetricReport:
    predictions = model.predict(samples, max_len=max_len, beam_width=beam_width)
    return corpus_report(predictions, [list(s.target) for s in samples])


def train(
    samples: list,
    model_cfg: ModelConfig | None,
    cfg: TrainConfig = TrainConfig(),
    model: SeqGnnModel | None = None,
    validation: list | None = None,
    dtype=np.float32,
    max_len: int = 20,
    stop_when: Callable[[EpochLog], bool] | None = None,
    validate_every: int = 1,
    min_count: int = 1,
) -> TrainResult:
    """Train a model with seeded shuffling, global-norm clipping and Adam.

    Pass either ``model_cfg`` (a vocabulary with ``min_count`` is built from
    ``samples`` and its ``vocab_size`` filled in) or a ready ``model``.  ``stop_when`` is
    called after every epoch and ends training early when it returns True.
    """
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    if model is None:
        vocab = vocabulary_for(samples, min_count=min_count)
        model = SeqGnnModel(model_cfg.replace(vocab_size=len(vocab)), vocab, seed=cfg.seed, dtype=dtype)
    params = model.params
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(params.size, cfg, dtype=np.float64 if params.dtype == np.float64 else np.float32)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(len(samples))
        losses, norms = [], []
        for i in range(0, len(order), cfg.batch_size):
            chunk = [samples[j] for j in order[i : i + cfg.batch_size]]
            batch = make_batch(chunk, model.vocab, dtype=params.dtype)
            params.zero_grad()
            loss = model.loss(batch)
            value = float(loss.value)
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, batch {i // cfg.batch_size} "
                    f"(sample ids {[s.id for s in chunk]}); max |param| = {np.abs(params.data).max():.3g}"
                )
            ad.backward(loss)
            norms.append(clip_global_norm(params.grad, cfg.clip_norm))
            opt.step(params.data, params.grad)
            losses.append(value)
        entry = EpochLog(epoch, float(np.mean(losses)), float(np.mean(norms)), time.perf_counter() - start)
        if validation and epoch % validate_every == 0:
            entry.validation = evaluate(model, validation, max_len=max_len)
        history.append(entry)
        log.info("epoch %d loss %.4f grad-norm %.3f (%.1fs)", epoch, entry.loss, entry.grad_norm, entry.seconds)
        if stop_when is not None and stop_when(entry):
            break
    return TrainResult(model, history)
