"""Reverse-mode automatic differentiation over numpy float64 arrays.

A graph is built per forward pass; each node keeps a closure that scatters
its output gradient into its parents' ``grad`` buffers. Single-threaded by
design, with a fixed reduction order so repeated runs are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # collapse a broadcast gradient back to `shape`
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        # np.zeros hands back lazily zeroed pages, so untrained parameters
        # cost no memory bandwidth until the first backward pass
        self.grad = np.zeros(self.values.shape) if requires_grad else None
        self.name = name
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy(), name=self.name)

    def item(self) -> float:
        return float(self.values)

    def backward(self) -> None:
        if not self.requires_grad:
            raise ShapeError("backward() called on a node with no gradient path")
        if self.values.size != 1:
            raise ShapeError("backward() requires a scalar output")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.values)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self):
        return transpose(self)

    def sum(self):
        return total(self)

    def mean(self):
        return mean(self)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.values.shape}{tag}, requires_grad={self.requires_grad})"


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def constant(values, name: str | None = None) -> Tensor:
    return Tensor(values, requires_grad=False, name=name)


def parameter(values, name: str) -> Tensor:
    return Tensor(np.ascontiguousarray(values, dtype=np.float64), requires_grad=True, name=name)


def _track(values, parents) -> Tensor:
    out = Tensor(values)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.grad = np.zeros_like(out.values)
        out._parents = tuple(p for p in parents if p.requires_grad)
    return out


# ---------------------------------------------------------------------------
# elementwise and structural ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = _track(a.values + b.values, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad, a.values.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(out.grad, b.values.shape)
        out._backward = _bw
    return out


def neg(a) -> Tensor:
    a = _coerce(a)
    out = _track(-a.values, (a,))
    if out.requires_grad:
        def _bw():
            a.grad -= out.grad
        out._backward = _bw
    return out


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = _track(a.values * b.values, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad * b.values, a.values.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(out.grad * a.values, b.values.shape)
        out._backward = _bw
    return out


def div(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = _track(a.values / b.values, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad / b.values, a.values.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(-out.grad * a.values / (b.values * b.values), b.values.shape)
        out._backward = _bw
    return out


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.values.ndim != 2 or b.values.ndim not in (1, 2):
        raise ShapeError(
            f"matmul supports (m,n)@(n,) and (m,n)@(n,p); got {a.values.shape} @ {b.values.shape}"
        )
    if a.values.shape[1] != b.values.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.values.shape} @ {b.values.shape}")
    out = _track(a.values @ b.values, (a, b))
    if out.requires_grad:
        def _bw():
            g = out.grad
            if b.values.ndim == 1:
                if a.requires_grad:
                    a.grad += np.outer(g, b.values)
                if b.requires_grad:
                    b.grad += a.values.T @ g
            else:
                if a.requires_grad:
                    a.grad += g @ b.values.T
                if b.requires_grad:
                    b.grad += a.values.T @ g
        out._backward = _bw
    return out


def transpose(a) -> Tensor:
    a = _coerce(a)
    if a.values.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got shape {a.values.shape}")
    out = _track(a.values.T.copy(), (a,))
    if out.requires_grad:
        def _bw():
            a.grad += out.grad.T
        out._backward = _bw
    return out


def reshape(a, shape) -> Tensor:
    a = _coerce(a)
    out = _track(a.values.reshape(shape), (a,))
    if out.requires_grad:
        def _bw():
            a.grad += out.grad.reshape(a.values.shape)
        out._backward = _bw
    return out


def concatenate(tensors, axis: int = 0) -> Tensor:
    ts = [_coerce(t) for t in tensors]
    out = _track(np.concatenate([t.values for t in ts], axis=axis), ts)
    if out.requires_grad:
        sizes = [t.values.shape[axis] for t in ts]
        offsets = np.cumsum([0] + sizes)
        def _bw():
            for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    sl = [slice(None)] * out.grad.ndim
                    sl[axis] = slice(lo, hi)
                    t.grad += out.grad[tuple(sl)]
        out._backward = _bw
    return out


def take_channel(a, index: int) -> Tensor:
    """Select one slice along the last axis (gradient scatters back)."""
    a = _coerce(a)
    out = _track(a.values[..., index].copy(), (a,))
    if out.requires_grad:
        def _bw():
            a.grad[..., index] += out.grad
        out._backward = _bw
    return out


def total(a) -> Tensor:
    a = _coerce(a)
    out = _track(np.asarray(a.values.sum()), (a,))
    if out.requires_grad:
        def _bw():
            a.grad += out.grad
        out._backward = _bw
    return out


def mean(a) -> Tensor:
    a = _coerce(a)
    out = _track(np.asarray(a.values.mean()), (a,))
    if out.requires_grad:
        inv = 1.0 / a.values.size
        def _bw():
            a.grad += out.grad * inv
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def leaky_relu(a, negative_slope: float = 0.2) -> Tensor:
    a = _coerce(a)
    mask = a.values >= 0
    out = _track(np.where(mask, a.values, negative_slope * a.values), (a,))
    if out.requires_grad:
        def _bw():
            a.grad += out.grad * np.where(mask, 1.0, negative_slope)
        out._backward = _bw
    return out


def tanh(a) -> Tensor:
    a = _coerce(a)
    y = np.tanh(a.values)
    out = _track(y, (a,))
    if out.requires_grad:
        def _bw():
            a.grad += out.grad * (1.0 - y * y)
        out._backward = _bw
    return out


def _sigmoid_values(x: np.ndarray) -> np.ndarray:
    # stable in both tails
    pos = x >= 0
    z = np.empty_like(x)
    z[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    z[~pos] = ex / (1.0 + ex)
    return z


def sigmoid(a) -> Tensor:
    a = _coerce(a)
    y = _sigmoid_values(a.values)
    out = _track(y, (a,))
    if out.requires_grad:
        def _bw():
            a.grad += out.grad * y * (1.0 - y)
        out._backward = _bw
    return out


def softplus(a) -> Tensor:
    """log(1 + exp(x)), the stable building block for the adversarial losses."""
    a = _coerce(a)
    out = _track(np.logaddexp(0.0, a.values), (a,))
    if out.requires_grad:
        def _bw():
            a.grad += out.grad * _sigmoid_values(a.values)
        out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# structured layers: transpose convolution, instance norm, RNN cell
# ---------------------------------------------------------------------------


def conv2d_transpose_values(x: np.ndarray, kernel: np.ndarray, stride: int) -> np.ndarray:
    """Upsampling transpose convolution with 'same' geometry, numpy only.

    x is (H, W, Cin), kernel is (k, k, Cin, Cout); the output is
    (H*stride, W*stride, Cout). Requires k >= stride. Each kernel tap
    scatters one matmul product into the padded output at stride offsets;
    the loop form keeps per-call allocations minimal.
    """
    h, w, cin = x.shape
    k = kernel.shape[0]
    s = stride
    cout = kernel.shape[3]
    pad_beg = (k - s) // 2
    hp, wp = (h - 1) * s + k, (w - 1) * s + k
    padded = np.zeros((hp, wp, cout))
    for a in range(k):
        for b in range(k):
            padded[a : a + (h - 1) * s + 1 : s, b : b + (w - 1) * s + 1 : s, :] += x @ kernel[a, b]
    return padded[pad_beg : pad_beg + h * s, pad_beg : pad_beg + w * s, :].copy()


def conv2d_transpose(x, kernel, stride: int) -> Tensor:
    x, kernel = _coerce(x), _coerce(kernel)
    xv, kv = x.values, kernel.values
    if xv.ndim != 3:
        raise ShapeError(f"conv2d_transpose input must be (H, W, Cin), got {xv.shape}")
    if kv.ndim != 4 or kv.shape[0] != kv.shape[1]:
        raise ShapeError(f"conv2d_transpose kernel must be (k, k, Cin, Cout), got {kv.shape}")
    if kv.shape[2] != xv.shape[2]:
        raise ShapeError(
            f"conv2d_transpose channel mismatch: input {xv.shape} vs kernel {kv.shape}"
        )
    if kv.shape[0] < stride:
        raise ShapeError("conv2d_transpose requires kernel size >= stride")
    out = _track(conv2d_transpose_values(xv, kv, stride), (x, kernel))
    if out.requires_grad:
        h, w, cin = xv.shape
        k, s = kv.shape[0], stride
        cout = kv.shape[3]
        pad_beg = (k - s) // 2
        hp, wp = (h - 1) * s + k, (w - 1) * s + k
        def _bw():
            gpad = np.zeros((hp, wp, cout))
            gpad[pad_beg : pad_beg + h * s, pad_beg : pad_beg + w * s, :] = out.grad
            x_flat = xv.reshape(-1, cin)
            for a in range(k):
                for b in range(k):
                    patch = gpad[a : a + (h - 1) * s + 1 : s, b : b + (w - 1) * s + 1 : s, :]
                    if x.requires_grad:
                        x.grad += patch @ kv[a, b].T
                    if kernel.requires_grad:
                        kernel.grad[a, b] += x_flat.T @ patch.reshape(-1, cout)
        out._backward = _bw
    return out


def instance_norm_values(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float
) -> np.ndarray:
    mu = x.mean(axis=(0, 1), keepdims=True)
    var = x.var(axis=(0, 1), keepdims=True)
    return gain * (x - mu) / np.sqrt(var + eps) + bias


def instance_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over the spatial axes of an (H, W, C) tensor."""
    x, gain, bias = _coerce(x), _coerce(gain), _coerce(bias)
    xv = x.values
    if xv.ndim != 3:
        raise ShapeError(f"instance_norm input must be (H, W, C), got {xv.shape}")
    c = xv.shape[2]
    if gain.values.shape != (c,) or bias.values.shape != (c,):
        raise ShapeError("instance_norm gain/bias must have one entry per channel")
    mu = xv.mean(axis=(0, 1), keepdims=True)
    var = xv.var(axis=(0, 1), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mu) * inv
    out = _track(gain.values * xhat + bias.values, (x, gain, bias))
    if out.requires_grad:
        def _bw():
            g = out.grad
            if bias.requires_grad:
                bias.grad += g.sum(axis=(0, 1))
            if gain.requires_grad:
                gain.grad += (g * xhat).sum(axis=(0, 1))
            if x.requires_grad:
                gx = g * gain.values
                m1 = gx.mean(axis=(0, 1), keepdims=True)
                m2 = (gx * xhat).mean(axis=(0, 1), keepdims=True)
                x.grad += inv * (gx - m1 - xhat * m2)
        out._backward = _bw
    return out


def simple_rnn_cell(x_t, h_prev, w_x, w_h, bias) -> Tensor:
    """h_t = tanh(W_x x_t + W_h h_{t-1} + b), composed from primitive ops."""
    return tanh(add(add(matmul(w_x, x_t), matmul(w_h, h_prev)), bias))
