"""Dense float64 tensors with reverse-mode autodiff and Adam.

Each operation returns a Tensor holding a closure that routes gradients to its
parents; backward() topologically sorts the recorded graph and runs the
closures once, consuming the tape.  Only the primitives needed by the models
live here: linear algebra, pointwise nonlinearities, softmax variants,
gather/segment-sum for message passing, and a conv1d built from slicing and
matmul so its gradient comes from already-tested pieces.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    pass


_GRAD_ENABLED = [True]


@contextmanager
def no_grad():
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, values, requires_grad=False):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backprop = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())

    def _ensure_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        return self.grad

    def backward(self):
        if self.values.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.values)
        for node in reversed(topo):
            if node._backprop is not None:
                node._backprop()
            node._backprop = None
            node._parents = ()

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __rsub__(self, other):
        return add(_as_tensor(other), -self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return narrow(self, key)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _wire(out: Tensor, parents, backprop) -> Tensor:
    if _GRAD_ENABLED[-1] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backprop = backprop
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        values = a.values + b.values
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(values)

    def backprop():
        g = out.grad
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(g, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad += _unbroadcast(g, b.shape)

    return _wire(out, (a, b), backprop)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        values = a.values * b.values
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(values)

    def backprop():
        g = out.grad
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(g * b.values, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad += _unbroadcast(g * a.values, b.shape)

    return _wire(out, (a, b), backprop)


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        values = a.values / b.values
    except ValueError:
        raise ShapeError(f"div: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(values)

    def backprop():
        g = out.grad
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(g / b.values, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad += _unbroadcast(-g * a.values / (b.values * b.values), b.shape)

    return _wire(out, (a, b), backprop)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-D or higher operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.values @ b.values)

    def backprop():
        g = out.grad
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(g @ np.swapaxes(b.values, -1, -2), a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad += _unbroadcast(np.swapaxes(a.values, -1, -2) @ g, b.shape)

    return _wire(out, (a, b), backprop)


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    s = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    out = Tensor(s)

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad += out.grad * s * (1.0 - s)

    return _wire(out, (x,), backprop)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.values)
    out = Tensor(t)

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad += out.grad * (1.0 - t * t)

    return _wire(out, (x,), backprop)


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    out = Tensor(np.where(mask, x.values, 0.0))

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad += out.grad * mask

    return _wire(out, (x,), backprop)


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.values))

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad += out.grad / x.values

    return _wire(out, (x,), backprop)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    out = Tensor(np.clip(x.values, lo, hi))
    pass_through = (x.values > lo) & (x.values < hi)

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad += out.grad * pass_through

    return _wire(out, (x,), backprop)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.values - x.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(p)

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            g = out.grad
            x.grad += p * (g - (g * p).sum(axis=axis, keepdims=True))

    return _wire(out, (x,), backprop)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.values - x.values.max(axis=axis, keepdims=True)
    ls = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = Tensor(ls)

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            g = out.grad
            x.grad += g - np.exp(ls) * g.sum(axis=axis, keepdims=True)

    return _wire(out, (x,), backprop)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.values for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backprop():
        g = out.grad
        for p, start, end in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p._ensure_grad()
                index = [slice(None)] * g.ndim
                index[axis] = slice(start, end)
                p.grad += g[tuple(index)]

    return _wire(out, tuple(parts), backprop)


def stack(parts: list[Tensor], axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = Tensor(np.stack([p.values for p in parts], axis=axis))

    def backprop():
        slabs = np.split(out.grad, len(parts), axis=axis)
        for p, slab in zip(parts, slabs):
            if p.requires_grad:
                p._ensure_grad()
                p.grad += slab.reshape(p.shape)

    return _wire(out, tuple(parts), backprop)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.values.reshape(shape))

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad += out.grad.reshape(x.shape)

    return _wire(out, (x,), backprop)


def narrow(x: Tensor, key) -> Tensor:
    """Basic (non-fancy) indexing with gradient; use gather for index arrays."""
    out = Tensor(x.values[key])

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad[key] += out.grad

    return _wire(out, (x,), backprop)


def reduce_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.values.sum(axis=axis, keepdims=keepdims))

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            x.grad += np.broadcast_to(g, x.shape)

    return _wire(out, (x,), backprop)


def reduce_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.values.size if axis is None else x.shape[axis]
    out = Tensor(x.values.mean(axis=axis, keepdims=keepdims))

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            x.grad += np.broadcast_to(g, x.shape) / count

    return _wire(out, (x,), backprop)


def reduce_max(x: Tensor, axis: int) -> Tensor:
    m = x.values.max(axis=axis, keepdims=True)
    out = Tensor(np.squeeze(m, axis=axis))
    mask = x.values == m
    counts = mask.sum(axis=axis, keepdims=True)

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            g = np.expand_dims(out.grad, axis)
            x.grad += mask * (g / counts)

    return _wire(out, (x,), backprop)


def _scatter_add_rows(acc: np.ndarray, idx: np.ndarray, rows: np.ndarray):
    """acc[idx[i]] += rows[i] with repeated indices, via sort + reduceat."""
    if len(idx) == 0:
        return
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    srows = rows[order]
    starts = np.flatnonzero(np.r_[True, sidx[1:] != sidx[:-1]])
    sums = np.add.reduceat(srows, starts, axis=0)
    acc[sidx[starts]] += sums


def gather(x: Tensor, idx) -> Tensor:
    """Rows x[idx] along axis 0 (embedding lookup)."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(x.values[idx])

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            _scatter_add_rows(x.grad, idx.reshape(-1), out.grad.reshape(-1, *x.shape[1:]))

    return _wire(out, (x,), backprop)


embedding_lookup = gather


def segment_sum(x: Tensor, idx, num_segments: int) -> Tensor:
    """out[j] = sum of rows x[i] with idx[i] == j; shape (num_segments, ...)."""
    idx = np.asarray(idx, dtype=np.intp)
    if len(idx) != x.shape[0]:
        raise ShapeError(f"segment_sum: {len(idx)} indices for {x.shape[0]} rows")
    values = np.zeros((num_segments,) + x.shape[1:])
    _scatter_add_rows(values, idx, x.values)
    out = Tensor(values)

    def backprop():
        if x.requires_grad:
            x._ensure_grad()
            x.grad += out.grad[idx]

    return _wire(out, (x,), backprop)


def conv1d(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """Valid (no padding) 1-D convolution; x (B, L, Cin), kernel (W, Cin, Cout)."""
    if x.ndim != 3 or kernel.ndim != 3:
        raise ShapeError(f"conv1d: expected 3-D inputs, got {x.shape} and {kernel.shape}")
    width, c_in, c_out = kernel.shape
    if x.shape[2] != c_in:
        raise ShapeError(f"conv1d: channel mismatch {x.shape} vs kernel {kernel.shape}")
    length_out = x.shape[1] - width + 1
    if length_out < 1:
        raise ShapeError(f"conv1d: sequence {x.shape[1]} shorter than kernel {width}")
    windows = concat([x[:, i : i + length_out, :] for i in range(width)], axis=2)
    flat_kernel = reshape(kernel, (width * c_in, c_out))
    out = matmul(windows, flat_kernel)
    if bias is not None:
        out = add(out, bias)
    return out


class Parameter:
    """Trainable tensor plus Adam moment state."""

    def __init__(self, values, name: str = ""):
        self.tensor = Tensor(values, requires_grad=True)
        self.name = name
        self.adam_m = np.zeros_like(self.tensor.values)
        self.adam_v = np.zeros_like(self.tensor.values)
        self.step_count = 0

    @property
    def values(self):
        return self.tensor.values

    @property
    def shape(self):
        return self.tensor.shape

    def zero_grad(self):
        self.tensor.grad = None


def adam_update(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam step with bias correction; clears gradients afterward."""
    for p in params:
        g = p.tensor.grad
        if g is None:
            raise ValueError(f"parameter {p.name or '<unnamed>'} has no gradient")
        p.step_count += 1
        p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * g
        p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * g * g
        m_hat = p.adam_m / (1.0 - beta1 ** p.step_count)
        v_hat = p.adam_v / (1.0 - beta2 ** p.step_count)
        p.tensor.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.tensor.grad = None


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def gradient_check(build_loss, params, eps: float = 1e-5) -> float:
    """Max relative error between autodiff and central finite differences.

    build_loss must be a pure function of the current parameter values.
    """
    for p in params:
        p.zero_grad()
    loss = build_loss()
    loss.backward()
    grads = [np.array(p.tensor.grad) for p in params]
    worst = 0.0
    for p, analytic in zip(params, grads):
        flat = p.tensor.values.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            with no_grad():
                up = build_loss().item()
            flat[i] = orig - eps
            with no_grad():
                down = build_loss().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            a = analytic.reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, abs(a - numeric) / denom)
        p.zero_grad()
    return worst
