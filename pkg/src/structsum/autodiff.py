"""A small reverse-mode differentiation tape over numpy arrays.

Every operation computes its value eagerly and, unless recording is disabled
with :func:`no_grad`, keeps a closure mapping the output gradient to the
gradients of its inputs.  :func:`backward` walks the recorded graph in
reverse topological order.

Leaves created from model parameters carry a ``sink``: a view into the flat
gradient buffer of :class:`~structsum.nn.Parameters`, into which their
gradient is accumulated.
"""

from __future__ import annotations

import contextlib

import numpy as np
from scipy import sparse

from . import graph as _graph

_RECORDING = [True]


@contextlib.contextmanager
def no_grad():
    """Evaluate operations without recording them for differentiation."""
    prev = _RECORDING[0]
    _RECORDING[0] = False
    try:
        yield
    finally:
        _RECORDING[0] = prev


class Var:
    __slots__ = ("value", "grad", "parents", "backward_fn", "sink")

    def __init__(self, value, parents=(), backward_fn=None, sink=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.sink = sink

    @property
    def shape(self):
        return self.value.shape

    @property
    def requires_grad(self) -> bool:
        return self.backward_fn is not None or self.sink is not None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, dtype={self.value.dtype})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x))


def _record(value, parents, backward_fn) -> Var:
    if not _RECORDING[0] or not any(p.requires_grad for p in parents):
        return Var(value)
    return Var(value, parents, backward_fn)


def backward(root: Var, grad=None) -> None:
    """Propagate gradients from ``root`` to every parameter leaf below it."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    root.grad = np.ones_like(root.value) if grad is None else grad
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        node.grad = None
        if node.sink is not None:
            node.sink += g
        if node.backward_fn is None:
            continue
        for p, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = pg.copy() if pg is g else pg
            else:
                p.grad = p.grad + pg


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise -------------------------------------------------------------


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    sa, sb = a.value.shape, b.value.shape
    return _record(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    sa, sb = a.value.shape, b.value.shape
    return _record(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    return _record(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(a, c: float) -> Var:
    a = as_var(a)
    return _record(a.value * c, (a,), lambda g: (g * c,))


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Var:
    a = as_var(a)
    s = sigmoid_np(a.value)
    return _record(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Var:
    a = as_var(a)
    t = np.tanh(a.value)
    return _record(t, (a,), lambda g: (g * (1.0 - t * t),))


def exp(a) -> Var:
    a = as_var(a)
    e = np.exp(a.value)
    return _record(e, (a,), lambda g: (g * e,))


def log(a, floor: float = 0.0) -> Var:
    """Natural log of ``max(a, floor)``; the gradient is zero where clamped."""
    a = as_var(a)
    clamped = np.maximum(a.value, floor) if floor > 0 else a.value
    live = a.value >= floor

    def bw(g):
        return (np.where(live, g / clamped, 0.0).astype(g.dtype),)

    return _record(np.log(clamped), (a,), bw)


def where(mask: np.ndarray, a, b) -> Var:
    """Select ``a`` where the constant boolean ``mask`` is true, else ``b``."""
    a, b = as_var(a), as_var(b)
    sa, sb = a.value.shape, b.value.shape
    return _record(
        np.where(mask, a.value, b.value),
        (a, b),
        lambda g: (_unbroadcast(np.where(mask, g, 0), sa), _unbroadcast(np.where(mask, 0, g), sb)),
    )


# -- shape and indexing ------------------------------------------------------


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    return _record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def reshape(a, shape) -> Var:
    a = as_var(a)
    old = a.value.shape
    return _record(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(vars_, axis: int = -1) -> Var:
    vs = [as_var(v) for v in vars_]
    sizes = [v.value.shape[axis] for v in vs]
    cuts = np.cumsum(sizes)[:-1]
    return _record(
        np.concatenate([v.value for v in vs], axis=axis), tuple(vs), lambda g: tuple(np.split(g, cuts, axis=axis))
    )


def take(a, idx) -> Var:
    """Basic (slice) indexing with a gradient."""
    a = as_var(a)
    shape, dtype = a.value.shape, a.value.dtype

    def bw(g):
        out = np.zeros(shape, dtype=dtype)
        out[idx] = g
        return (out,)

    return _record(a.value[idx], (a,), bw)


def gather_rows(a, index) -> Var:
    """``a[index]`` for an integer index array; repeated indices accumulate."""
    a = as_var(a)
    index = np.asarray(index, dtype=np.int64)
    shape, dtype = a.value.shape, a.value.dtype

    def bw(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, index, g)
        return (out,)

    return _record(a.value[index], (a,), bw)


def pick(a, flat_index) -> Var:
    """Elements of ``a`` at positions of the flattened array."""
    a = as_var(a)
    flat_index = np.asarray(flat_index, dtype=np.int64)
    shape, dtype = a.value.shape, a.value.dtype

    def bw(g):
        out = np.zeros(int(np.prod(shape)), dtype=dtype)
        np.add.at(out, flat_index, g)
        return (out.reshape(shape),)

    return _record(a.value.reshape(-1)[flat_index], (a,), bw)


def spmm(matrix: sparse.spmatrix, a) -> Var:
    """Product of a constant sparse matrix with ``a``."""
    a = as_var(a)
    mt = matrix.T.tocsr()
    return _record(np.asarray(matrix @ a.value), (a,), lambda g: (np.asarray(mt @ g),))


# -- reductions --------------------------------------------------------------


def total(a) -> Var:
    a = as_var(a)
    shape = a.value.shape
    return _record(np.asarray(a.value.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def row_sum(a) -> Var:
    """Sum over the last axis, keeping it as size 1."""
    a = as_var(a)
    shape = a.value.shape
    return _record(a.value.sum(axis=-1, keepdims=True), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def segment_sum(a, segment_ids, segment_count: int) -> Var:
    a = as_var(a)
    ids = np.asarray(segment_ids, dtype=np.int64)
    out = _graph.segment_sum(a.value, ids, segment_count)
    return _record(out, (a,), lambda g: (g[ids],))


def segment_softmax(a, segment_ids, segment_count: int) -> Var:
    a = as_var(a)
    ids = np.asarray(segment_ids, dtype=np.int64)
    s = _graph.segment_softmax(a.value, ids, segment_count)

    def bw(g):
        inner = _graph.segment_sum(g * s, ids, segment_count)
        return (s * (g - inner[ids]),)

    return _record(s, (a,), bw)


def softmax_rows(a) -> Var:
    a = as_var(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)
    return _record(s, (a,), lambda g: (s * (g - (g * s).sum(axis=-1, keepdims=True)),))


# -- fused recurrent cells ---------------------------------------------------


def lstm_cell(x, h, c, weight, bias):
    """One LSTM step for a batch of rows.

    ``weight`` has shape ``(d_in + H, 4H)`` acting on ``[x, h]``; gate blocks
    are ordered ``i, f, o, g``.  Returns ``(h', c')``.
    """
    x, h, c, weight, bias = (as_var(v) for v in (x, h, c, weight, bias))
    xh = np.concatenate([x.value, h.value], axis=1)
    z = xh @ weight.value + bias.value
    hd = h.value.shape[1]
    i = sigmoid_np(z[:, :hd])
    f = sigmoid_np(z[:, hd : 2 * hd])
    o = sigmoid_np(z[:, 2 * hd : 3 * hd])
    u = np.tanh(z[:, 3 * hd :])
    c_new = f * c.value + i * u
    tc = np.tanh(c_new)
    h_new = o * tc
    din = x.value.shape[1]

    def bw(g):
        gh, gc = g[:, :hd], g[:, hd:]
        gc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [gc * u * i * (1.0 - i), gc * c.value * f * (1.0 - f), gh * tc * o * (1.0 - o), gc * i * (1.0 - u * u)],
            axis=1,
        )
        dxh = dz @ weight.value.T
        return dxh[:, :din], dxh[:, din:], gc * f, xh.T @ dz, dz.sum(axis=0)

    hc = _record(np.concatenate([h_new, c_new], axis=1), (x, h, c, weight, bias), bw)
    return take(hc, (slice(None), slice(0, hd))), take(hc, (slice(None), slice(hd, None)))


def gru_cell(m, h, w_in, w_rec, bias):
    """One GRU step: ``h' = (1 - z) * h + z * h~``.

    ``w_in`` maps the message ``m`` and ``w_rec`` the state ``h`` to the
    stacked ``z, r, candidate`` blocks (each ``(d, 3H)``); the reset gate is
    applied to ``h`` before the recurrent candidate projection.
    """
    m, h, w_in, w_rec, bias = (as_var(v) for v in (m, h, w_in, w_rec, bias))
    hd = h.value.shape[1]
    mx = m.value @ w_in.value + bias.value
    hv = h.value
    u_zr = hv @ w_rec.value[:, : 2 * hd]
    z = sigmoid_np(mx[:, :hd] + u_zr[:, :hd])
    r = sigmoid_np(mx[:, hd : 2 * hd] + u_zr[:, hd:])
    rh = r * hv
    cand = np.tanh(mx[:, 2 * hd :] + rh @ w_rec.value[:, 2 * hd :])
    h_new = (1.0 - z) * hv + z * cand

    def bw(g):
        uc = w_rec.value[:, 2 * hd :]
        d_cand = g * z * (1.0 - cand * cand)
        d_z = g * (cand - hv) * z * (1.0 - z)
        d_rh = d_cand @ uc.T
        d_r = d_rh * hv * r * (1.0 - r)
        d_pre = np.concatenate([d_z, d_r, d_cand], axis=1)
        d_rec = np.concatenate([hv.T @ d_z, hv.T @ d_r, rh.T @ d_cand], axis=1)
        d_h = g * (1.0 - z) + d_rh * r + d_z @ w_rec.value[:, :hd].T + d_r @ w_rec.value[:, hd : 2 * hd].T
        return d_pre @ w_in.value.T, d_h, m.value.T @ d_pre, d_rec, d_pre.sum(axis=0)

    return _record(h_new, (m, h, w_in, w_rec, bias), bw)


def lstm_sequence(inputs, mask: np.ndarray, weight, bias) -> Var:
    """Unrolled LSTM over time-major ``inputs`` of shape ``(L, B, d)``.

    Rows whose ``mask[t, b]`` is false keep their previous state, so padded
    tails leave the final state of shorter sequences untouched.  Returns all
    hidden states, shape ``(L, B, H)``; backpropagation through time is done
    inside the op.
    """
    inputs, weight, bias = as_var(inputs), as_var(weight), as_var(bias)
    x_all, w, b = inputs.value, weight.value, bias.value
    steps, batch, din = x_all.shape
    hd = w.shape[1] // 4
    dtype = x_all.dtype
    keep = mask[:, :, None]
    # input contribution for every step in one product
    zx = x_all.reshape(steps * batch, din) @ w[:din] + b
    zx = zx.reshape(steps, batch, 4 * hd)
    w_h = w[din:]
    hs = np.zeros((steps + 1, batch, hd), dtype=dtype)
    cs = np.zeros((steps + 1, batch, hd), dtype=dtype)
    gates = np.empty((steps, batch, 4 * hd), dtype=dtype)
    tcs = np.empty((steps, batch, hd), dtype=dtype)
    for t in range(steps):
        z = zx[t] + hs[t] @ w_h
        g = gates[t]
        g[:, : 3 * hd] = sigmoid_np(z[:, : 3 * hd])
        g[:, 3 * hd :] = np.tanh(z[:, 3 * hd :])
        c_new = g[:, hd : 2 * hd] * cs[t] + g[:, :hd] * g[:, 3 * hd :]
        tcs[t] = np.tanh(c_new)
        h_new = g[:, 2 * hd : 3 * hd] * tcs[t]
        cs[t + 1] = np.where(keep[t], c_new, cs[t])
        hs[t + 1] = np.where(keep[t], h_new, hs[t])

    def bw(g_out):
        dz_all = np.zeros((steps, batch, 4 * hd), dtype=dtype)
        dh = np.zeros((batch, hd), dtype=dtype)
        dc = np.zeros((batch, hd), dtype=dtype)
        for t in range(steps - 1, -1, -1):
            dh = dh + g_out[t]
            k = keep[t]
            i, f, o, u = (gates[t][:, j * hd : (j + 1) * hd] for j in range(4))
            tc = tcs[t]
            dh_cell = np.where(k, dh, 0)
            dc_cell = np.where(k, dc, 0) + dh_cell * o * (1.0 - tc * tc)
            dz = dz_all[t]
            dz[:, :hd] = dc_cell * u * i * (1.0 - i)
            dz[:, hd : 2 * hd] = dc_cell * cs[t] * f * (1.0 - f)
            dz[:, 2 * hd : 3 * hd] = dh_cell * tc * o * (1.0 - o)
            dz[:, 3 * hd :] = dc_cell * i * (1.0 - u * u)
            dh = np.where(k, dz @ w_h.T, dh)
            dc = np.where(k, dc_cell * f, dc)
        dz_flat = dz_all.reshape(steps * batch, 4 * hd)
        dx = (dz_flat @ w[:din].T).reshape(steps, batch, din)
        dw = np.concatenate(
            [x_all.reshape(steps * batch, din).T @ dz_flat, hs[:-1].reshape(steps * batch, hd).T @ dz_flat], axis=0
        )
        return dx, dw, dz_flat.sum(axis=0)

    return _record(hs[1:].copy(), (inputs, weight, bias), bw)
