"""Parameter storage and the differentiable building blocks of the model.

All weights use the row-vector convention ``y = x @ W + b`` with ``W`` of
shape ``(in, out)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Var


class ShapeError(ValueError):
    pass


class Parameters:
    """Named tensors backed by one flat value vector and one flat gradient.

    ``params["name"]`` returns a writable view of the value buffer, so the
    whole model can be treated as a single vector (``params.data``) by the
    optimizer, the gradient checker and the checkpoint writer.
    """

    def __init__(self, shapes: dict, dtype=np.float32):
        self.shapes = {name: tuple(int(d) for d in shape) for name, shape in shapes.items()}
        self.slices = {}
        offset = 0
        for name, shape in self.shapes.items():
            size = int(np.prod(shape))
            self.slices[name] = slice(offset, offset + size)
            offset += size
        self.data = np.zeros(offset, dtype=dtype)
        self.grad = np.zeros(offset, dtype=dtype)

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def names(self) -> list:
        return list(self.shapes)

    @property
    def size(self) -> int:
        return self.data.size

    def __contains__(self, name) -> bool:
        return name in self.shapes

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[self.slices[name]].reshape(self.shapes[name])

    def __setitem__(self, name: str, value) -> None:
        self[name][...] = value

    def grad_of(self, name: str) -> np.ndarray:
        return self.grad[self.slices[name]].reshape(self.shapes[name])

    def var(self, name: str) -> Var:
        """A tape leaf whose gradient accumulates into ``grad_of(name)``."""
        return Var(self[name], sink=self.grad_of(name))

    def zero_grad(self) -> None:
        self.grad[:] = 0

    def astype(self, dtype) -> "Parameters":
        out = Parameters(self.shapes, dtype=dtype)
        out.data[:] = self.data
        return out

    def copy(self) -> "Parameters":
        return self.astype(self.dtype)


# -- initialisation ----------------------------------------------------------


def glorot_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) >= 2 else (shape[0], shape[0])
    if len(shape) == 3:
        fan_in, fan_out = shape[1], shape[2]
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)


def orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def recurrent_init(rng: np.random.Generator, hidden: int, blocks: int) -> np.ndarray:
    """Stacked orthogonal ``(hidden, blocks * hidden)`` recurrent matrix."""
    return np.concatenate([orthogonal(rng, hidden) for _ in range(blocks)], axis=1)


# -- layers ------------------------------------------------------------------


def linear(x, weight, bias=None) -> Var:
    """Affine map ``x @ weight + bias`` over rows of ``x``."""
    x, weight = ad.as_var(x), ad.as_var(weight)
    if x.value.shape[-1] != weight.value.shape[0]:
        raise ShapeError(f"linear: input dim {x.value.shape[-1]} does not match weight {weight.value.shape}")
    y = ad.matmul(x, weight)
    return y if bias is None else ad.add(y, bias)


def _rows(v) -> Var:
    v = ad.as_var(v)
    return ad.reshape(v, (1, -1)) if v.value.ndim == 1 else v


def gru_cell(message, state, w_in, w_rec, bias) -> Var:
    """GRU update of ``state`` given the aggregated ``message``.

    ``z = sig(m Wz + h Uz + bz)``, ``r = sig(m Wr + h Ur + br)``,
    ``h~ = tanh(m Wh + (r*h) Uh + bh)``, ``h' = (1 - z) h + z h~``.
    """
    message, state = _rows(message), _rows(state)
    hd = state.value.shape[1]
    if message.value.shape != state.value.shape or ad.as_var(w_rec).value.shape != (hd, 3 * hd):
        raise ShapeError("gru_cell: message, state and weights must share the cell dimension")
    return ad.gru_cell(message, state, w_in, w_rec, bias)


def lstm_cell(x, h, c, weight, bias):
    """LSTM step returning ``(h', c')``; gates ordered ``i, f, o, g``."""
    x, h, c = _rows(x), _rows(h), _rows(c)
    hd = h.value.shape[1]
    if ad.as_var(weight).value.shape != (x.value.shape[1] + hd, 4 * hd) or c.value.shape != h.value.shape:
        raise ShapeError("lstm_cell: weight must have shape (d_in + H, 4H)")
    return ad.lstm_cell(x, h, c, weight, bias)


def bidirectional_encode(embedded, lengths, fwd: tuple, bwd: tuple):
    """Run forward and backward LSTMs over a batch of token sequences.

    ``embedded`` holds the token vectors of all samples concatenated in order
    (sample ``b`` owns ``lengths[b]`` consecutive rows).  ``fwd`` and ``bwd``
    are ``(weight, bias)`` pairs.  Returns ``(per_token, sequence)`` where
    ``per_token[i] = [fwd_i, bwd_i]`` and ``sequence[b]`` concatenates the
    final forward and backward states of sample ``b``.
    """
    embedded = ad.as_var(embedded)
    lengths = np.asarray(lengths, dtype=np.int64)
    if len(lengths) == 0 or lengths.min() < 1:
        raise ShapeError("bidirectional_encode: empty sequence")
    if lengths.sum() != embedded.value.shape[0]:
        raise ShapeError("bidirectional_encode: lengths do not match the embedded rows")
    hidden = ad.as_var(fwd[0]).value.shape[1] // 4
    batch, steps = len(lengths), int(lengths.max())
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    t = np.arange(steps)[:, None]
    active = t < lengths[None, :]
    fwd_rows = offsets[None, :] + np.minimum(t, lengths[None, :] - 1)
    bwd_rows = offsets[None, :] + np.maximum(lengths[None, :] - 1 - t, 0)

    width = embedded.value.shape[1]
    f_in = ad.reshape(ad.gather_rows(embedded, fwd_rows.reshape(-1)), (steps, batch, width))
    b_in = ad.reshape(ad.gather_rows(embedded, bwd_rows.reshape(-1)), (steps, batch, width))
    f_states = ad.reshape(ad.lstm_sequence(f_in, active, *fwd), (steps * batch, hidden))
    b_states = ad.reshape(ad.lstm_sequence(b_in, active, *bwd), (steps * batch, hidden))

    sample = np.repeat(np.arange(batch), lengths)
    pos = np.arange(len(sample)) - offsets[sample]
    per_token = ad.concat(
        [
            ad.gather_rows(f_states, pos * batch + sample),
            ad.gather_rows(b_states, (lengths[sample] - 1 - pos) * batch + sample),
        ],
        axis=1,
    )
    last = (steps - 1) * batch + np.arange(batch)
    return per_token, ad.concat([ad.gather_rows(f_states, last), ad.gather_rows(b_states, last)], axis=1)


def attention(query, memories, memory_segment, weight, keys=None):
    """Bilinear attention of one query per segment over that segment's memories.

    Scores are ``q_s . (m_j @ weight)`` and are normalised with a per-segment
    softmax.  ``weight`` has shape ``(memory_dim, query_dim)``; pass ``keys``
    (``memories @ weight``) to reuse them across decoder steps.
    Returns ``(context, weights)``.
    """
    query, memories = _rows(query), ad.as_var(memories)
    seg = np.asarray(memory_segment, dtype=np.int64)
    batch = query.value.shape[0]
    if len(seg) != memories.value.shape[0]:
        raise ShapeError("attention: one segment id per memory is required")
    if np.any(np.bincount(seg, minlength=batch)[:batch] == 0):
        raise ShapeError("attention: empty memory segment")
    if keys is None:
        keys = ad.matmul(memories, weight)
    scores = ad.row_sum(ad.mul(ad.gather_rows(query, seg), keys))
    weights = ad.segment_softmax(ad.reshape(scores, (-1,)), seg, batch)
    context = ad.segment_sum(ad.mul(ad.reshape(weights, (-1, 1)), memories), seg, batch)
    return context, weights


# -- verification --------------------------------------------------------------


class GradientCheckError(ValueError):
    pass


@dataclass
class GradCheckReport:
    coordinates: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    relative_errors: np.ndarray
    tolerance: float
    names: list = field(default_factory=list)

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_errors.max()) if self.relative_errors.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def relative_error(a, n) -> np.ndarray:
    a, n = np.asarray(a, dtype=float), np.asarray(n, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def gradient_check(
    loss_fn: Callable[[Parameters], Var],
    params: Parameters,
    tolerance: float = 1e-4,
    coordinates=None,
    num_samples: int | None = None,
    step: float = 1e-5,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare the tape gradient of ``loss_fn`` with central finite differences.

    ``coordinates`` selects flat parameter indices; otherwise ``num_samples``
    indices are drawn at random (all of them when ``num_samples`` is None).
    """
    if params.dtype != np.float64:
        raise GradientCheckError("gradient_check requires 64-bit parameters")
    params.zero_grad()
    loss = loss_fn(params)
    if not np.isfinite(loss.value):
        raise GradientCheckError("loss is not finite")
    ad.backward(loss)
    analytic_all = params.grad.copy()

    if coordinates is None:
        if num_samples is None or num_samples >= params.size:
            coordinates = np.arange(params.size)
        else:
            rng = rng or np.random.default_rng(0)
            coordinates = np.sort(rng.choice(params.size, size=num_samples, replace=False))
    coordinates = np.asarray(coordinates, dtype=np.int64)

    numeric = np.empty(len(coordinates))
    with ad.no_grad():
        for j, idx in enumerate(coordinates):
            orig = params.data[idx]
            params.data[idx] = orig + step
            up = float(loss_fn(params).value)
            params.data[idx] = orig - step
            down = float(loss_fn(params).value)
            params.data[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise GradientCheckError("loss is not finite under perturbation")
            numeric[j] = (up - down) / (2 * step)
    analytic = analytic_all[coordinates]
    bounds = {name: sl for name, sl in params.slices.items()}
    names = [next(n for n, sl in bounds.items() if sl.start <= i < sl.stop) for i in coordinates]
    return GradCheckReport(coordinates, analytic, numeric, relative_error(analytic, numeric), tolerance, names)
