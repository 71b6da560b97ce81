"""Network building blocks.

Initialized layers (dense, transpose convolution, instance norm, simple
RNN), the physicality-enforcing density-matrix head, the measurement
statistics head, the MSE loss, and the Adam optimizer. Layers expose both a
graph-building ``__call__`` used in training and a numpy-only ``inference``
used when replaying a trained model (optionally routing every matrix-vector
product through a caller-supplied function, e.g. an analog crossbar).
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, constant, parameter
from .errors import (
    DegenerateParameterError,
    DivergenceError,
    ResourceError,
    ShapeError,
)
from .measurement import METHOD_M1, METHOD_M2, BasisSet
from .quantum import basis_transform, pauli_operator

LEAKY_RELU_SLOPE = 0.2
INSTANCE_NORM_EPS = 1e-5
DEGENERATE_TRACE_FLOOR = 1e-30

# largest dense-equivalent a transpose convolution may be lowered to
MAX_LOWERED_ENTRIES = 2**25


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    a = rng.random(size=shape)
    a *= 2.0 * limit
    a -= limit
    return a


def _default_matvec(name: str, matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return matrix @ vec


class _LazyInit:
    """Parameter materialization deferred to first use.

    Layers are constructed with either a Generator or a zero-argument
    callable producing one; the callable form gives each layer its own
    substream so draws do not depend on which layer is touched first.
    Building a large model therefore costs nothing until it is trained.
    """

    def _defer(self, rng_source) -> None:
        self._pending = rng_source

    def _materialize(self) -> None:
        if self._pending is not None:
            source = self._pending
            self._pending = None
            self.init_params(source() if callable(source) else source)


class Dense(_LazyInit):
    def __init__(self, rng, in_dim: int, out_dim: int, use_bias: bool = True, name: str = "dense"):
        self.in_dim, self.out_dim, self.use_bias, self.name = in_dim, out_dim, use_bias, name
        self.weight: Tensor = None
        self.bias: Tensor | None = None
        self._defer(rng)

    def init_params(self, rng) -> None:
        self._pending = None
        w = glorot_uniform(rng, (self.out_dim, self.in_dim), self.in_dim, self.out_dim)
        self.weight = parameter(w, name=f"{self.name}.weight")
        if self.use_bias:
            self.bias = parameter(np.zeros(self.out_dim), name=f"{self.name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        self._materialize()
        y = ad.matmul(self.weight, x)
        return ad.add(y, self.bias) if self.use_bias else y

    def inference(self, x: np.ndarray, mm=_default_matvec) -> np.ndarray:
        self._materialize()
        y = mm(self.name, self.weight.values, x)
        return y + self.bias.values if self.use_bias else y

    def params(self):
        self._materialize()
        return [self.weight] + ([self.bias] if self.use_bias else [])

    def parameter_count(self) -> int:
        return self.in_dim * self.out_dim + (self.out_dim if self.use_bias else 0)

    def spec_entry(self) -> dict:
        return {
            "type": "dense",
            "in": self.in_dim,
            "out": self.out_dim,
            "bias": self.use_bias,
            "params": self.parameter_count(),
        }


class LeakyReLU:
    def __init__(self, slope: float = LEAKY_RELU_SLOPE):
        self.slope = slope

    def init_params(self, rng) -> None:
        pass

    def __call__(self, x: Tensor) -> Tensor:
        return ad.leaky_relu(x, self.slope)

    def inference(self, x: np.ndarray, mm=_default_matvec) -> np.ndarray:
        return np.where(x >= 0, x, self.slope * x)

    def params(self):
        return []

    def parameter_count(self) -> int:
        return 0

    def spec_entry(self) -> dict:
        return {"type": "leaky_relu", "slope": self.slope, "params": 0}


class Reshape:
    def __init__(self, shape: tuple):
        self.shape = tuple(shape)

    def init_params(self, rng) -> None:
        pass

    def __call__(self, x: Tensor) -> Tensor:
        return ad.reshape(x, self.shape)

    def inference(self, x: np.ndarray, mm=_default_matvec) -> np.ndarray:
        return x.reshape(self.shape)

    def params(self):
        return []

    def parameter_count(self) -> int:
        return 0

    def spec_entry(self) -> dict:
        return {"type": "reshape", "shape": list(self.shape), "params": 0}


class ConvTranspose2d(_LazyInit):
    """Square-kernel 'same' transpose convolution on (H, W, C) activations."""

    def __init__(self, rng, in_channels, out_channels, kernel_size, stride, name="convT"):
        self.cin, self.cout = in_channels, out_channels
        self.kernel_size, self.stride, self.name = kernel_size, stride, name
        self.kernel: Tensor = None
        self._lowered: dict = {}
        self._defer(rng)

    def init_params(self, rng) -> None:
        self._pending = None
        k = self.kernel_size
        fan_in = k * k * self.cin
        fan_out = k * k * self.cout
        self.kernel = parameter(
            glorot_uniform(rng, (k, k, self.cin, self.cout), fan_in, fan_out),
            name=f"{self.name}.kernel",
        )
        self._lowered = {}

    def __call__(self, x: Tensor) -> Tensor:
        self._materialize()
        return ad.conv2d_transpose(x, self.kernel, self.stride)

    def inference(self, x: np.ndarray, mm=_default_matvec) -> np.ndarray:
        self._materialize()
        if mm is _default_matvec:
            return ad.conv2d_transpose_values(x, self.kernel.values, self.stride)
        h, w, _ = x.shape
        lowered = self.dense_equivalent((h, w))
        y = mm(self.name, lowered, x.reshape(-1))
        return y.reshape(h * self.stride, w * self.stride, self.cout)

    def dense_equivalent(self, spatial_in: tuple[int, int]) -> np.ndarray:
        """The (out_size, in_size) matrix computing this layer on flattened input.

        Cached per spatial shape against the current kernel; the cache is
        dropped whenever the layer is re-initialized, so lower only trained
        (no longer updating) models.
        """
        self._materialize()
        cached = self._lowered.get(tuple(spatial_in))
        if cached is not None:
            return cached
        h, w = spatial_in
        k, s = self.kernel_size, self.stride
        oh, ow = h * s, w * s
        out_size = oh * ow * self.cout
        in_size = h * w * self.cin
        if out_size * in_size > MAX_LOWERED_ENTRIES:
            raise ResourceError(
                f"dense lowering of {self.name} needs {out_size}x{in_size} entries, "
                f"above the {MAX_LOWERED_ENTRIES} limit"
            )
        pad_beg = (k - s) // 2
        kv = self.kernel.values
        mat = np.zeros((out_size, in_size))
        for a in range(k):
            for b in range(k):
                block = kv[a, b].T  # (cout, cin)
                for i in range(h):
                    r = i * s + a - pad_beg
                    if not 0 <= r < oh:
                        continue
                    for j in range(w):
                        c = j * s + b - pad_beg
                        if not 0 <= c < ow:
                            continue
                        ro = (r * ow + c) * self.cout
                        co = (i * w + j) * self.cin
                        mat[ro : ro + self.cout, co : co + self.cin] += block
        self._lowered[tuple(spatial_in)] = mat
        return mat

    def params(self):
        self._materialize()
        return [self.kernel]

    def parameter_count(self) -> int:
        return self.kernel_size * self.kernel_size * self.cin * self.cout

    def spec_entry(self) -> dict:
        return {
            "type": "conv2d_transpose",
            "in_channels": self.cin,
            "out_channels": self.cout,
            "kernel": self.kernel_size,
            "stride": self.stride,
            "params": self.parameter_count(),
        }


class InstanceNorm:
    def __init__(self, channels: int, name: str = "inorm", eps: float = INSTANCE_NORM_EPS):
        self.channels, self.name, self.eps = channels, name, eps
        self.gain: Tensor = None
        self.bias: Tensor = None
        self.init_params(None)

    def init_params(self, rng) -> None:
        self.gain = parameter(np.ones(self.channels), name=f"{self.name}.gain")
        self.bias = parameter(np.zeros(self.channels), name=f"{self.name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return ad.instance_norm(x, self.gain, self.bias, self.eps)

    def inference(self, x: np.ndarray, mm=_default_matvec) -> np.ndarray:
        return ad.instance_norm_values(x, self.gain.values, self.bias.values, self.eps)

    def params(self):
        return [self.gain, self.bias]

    def parameter_count(self) -> int:
        return 2 * self.channels

    def spec_entry(self) -> dict:
        return {"type": "instance_norm", "channels": self.channels, "params": self.parameter_count()}


class SimpleRNN(_LazyInit):
    """Unrolled tanh RNN layer over a sequence of input vectors.

    The input sequence is a constant (T, in_dim) array; hidden state flows
    through the graph. With return_sequences the output is a list of per-step
    hidden Tensors, otherwise the final hidden Tensor.
    """

    def __init__(self, rng, in_dim: int, units: int, return_sequences: bool, name: str = "rnn"):
        self.in_dim, self.units, self.return_sequences = in_dim, units, return_sequences
        self.name = name
        self.w_x: Tensor = None
        self.w_h: Tensor = None
        self.bias: Tensor = None
        self._defer(rng)

    def init_params(self, rng) -> None:
        self._pending = None
        self.w_x = parameter(
            glorot_uniform(rng, (self.units, self.in_dim), self.in_dim, self.units),
            name=f"{self.name}.w_x",
        )
        self.w_h = parameter(
            glorot_uniform(rng, (self.units, self.units), self.units, self.units),
            name=f"{self.name}.w_h",
        )
        self.bias = parameter(np.zeros(self.units), name=f"{self.name}.bias")

    def __call__(self, seq):
        self._materialize()
        if isinstance(seq, Tensor):  # constant input sequence
            seq = seq.values
        if isinstance(seq, np.ndarray):
            if seq.ndim == 1:
                seq = seq[:, None]
            steps = [constant(seq[t]) for t in range(seq.shape[0])]
        else:
            steps = list(seq)
        h = constant(np.zeros(self.units))
        outputs = []
        for x_t in steps:
            h = ad.simple_rnn_cell(x_t, h, self.w_x, self.w_h, self.bias)
            if self.return_sequences:
                outputs.append(h)
        return outputs if self.return_sequences else h

    def inference(self, seq: np.ndarray, mm=_default_matvec):
        self._materialize()
        if isinstance(seq, list):
            seq = np.asarray(seq)
        if seq.ndim == 1:
            seq = seq[:, None]
        h = np.zeros(self.units)
        outputs = []
        for t in range(seq.shape[0]):
            h = np.tanh(
                mm(f"{self.name}.w_x", self.w_x.values, seq[t])
                + mm(f"{self.name}.w_h", self.w_h.values, h)
                + self.bias.values
            )
            if self.return_sequences:
                outputs.append(h)
        return np.asarray(outputs) if self.return_sequences else h

    def params(self):
        self._materialize()
        return [self.w_x, self.w_h, self.bias]

    def parameter_count(self) -> int:
        return self.units * self.in_dim + self.units * self.units + self.units

    def spec_entry(self) -> dict:
        return {
            "type": "simple_rnn",
            "in": self.in_dim,
            "units": self.units,
            "return_sequences": self.return_sequences,
            "params": self.parameter_count(),
        }


class DensityMatrixHead:
    """Maps raw (D, D, 2) output to a physical density matrix.

    Reading the channels as T = A + iB, the head computes
    rho = T T^dagger / Tr(T T^dagger), which is Hermitian and PSD by
    construction and has unit trace by normalization. Returned as a
    (real, imaginary) pair of graph tensors.
    """

    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.dim = 2**n_qubits

    def __call__(self, raw: Tensor):
        d = self.dim
        if raw.values.shape != (d, d, 2):
            raise ShapeError(f"density head expects shape ({d}, {d}, 2), got {raw.values.shape}")
        a = ad.take_channel(raw, 0)
        b = ad.take_channel(raw, 1)
        trace = ad.add(ad.total(ad.mul(a, a)), ad.total(ad.mul(b, b)))
        if float(trace.values) < DEGENERATE_TRACE_FLOOR:
            raise DegenerateParameterError(
                f"density parameterization trace {float(trace.values)!r} below "
                f"{DEGENERATE_TRACE_FLOOR}"
            )
        at = ad.transpose(a)
        bt = ad.transpose(b)
        real = ad.add(ad.matmul(a, at), ad.matmul(b, bt))
        imag = ad.add(ad.matmul(b, at), ad.neg(ad.matmul(a, bt)))
        return ad.div(real, trace), ad.div(imag, trace)

    def numpy_rho(self, raw: np.ndarray) -> np.ndarray:
        t = raw[:, :, 0] + 1j * raw[:, :, 1]
        gram = t @ t.conj().T
        tr = float(np.trace(gram).real)
        if tr < DEGENERATE_TRACE_FLOOR:
            raise DegenerateParameterError("density parameterization trace underflow")
        return gram / tr

    def spec_entry(self) -> dict:
        return {"type": "density_matrix", "dim": self.dim, "params": 0}


class StatisticsHead:
    """Predicted measurement statistics of the reconstructed density matrix.

    For Hermitian observables Tr(rho A).real decomposes into inner products of
    the real and imaginary parts, so the whole head is two constant matmuls:
    one row per basis for expectation data, one row per (basis, outcome) for
    probability data (basis-major ordering). The operator bank is built
    lazily on first use.
    """

    def __init__(self, bases: BasisSet, method: str):
        self.bases = bases
        self.method = method
        self.dim = 2**bases.n_qubits
        self.rows = len(bases) if method == METHOD_M1 else len(bases) * self.dim
        self._bank = None

    def _build_bank(self):
        rows_re, rows_im = [], []
        if self.method == METHOD_M1:
            for s in self.bases:
                op = pauli_operator(s)
                rows_re.append(op.real.reshape(-1))
                rows_im.append(op.imag.reshape(-1))
        else:
            for s in self.bases:
                u = basis_transform(s)
                for a in range(self.dim):
                    proj = np.outer(u[:, a], u[:, a].conj())
                    rows_re.append(proj.real.reshape(-1))
                    rows_im.append(proj.imag.reshape(-1))
        self._bank = (
            constant(np.array(rows_re), name="stats.re"),
            constant(np.array(rows_im), name="stats.im"),
        )

    def bank(self):
        if self._bank is None:
            self._build_bank()
        return self._bank

    def __call__(self, rho_re: Tensor, rho_im: Tensor) -> Tensor:
        w_re, w_im = self.bank()
        flat_re = ad.reshape(rho_re, (self.dim * self.dim,))
        flat_im = ad.reshape(rho_im, (self.dim * self.dim,))
        return ad.add(ad.matmul(w_re, flat_re), ad.matmul(w_im, flat_im))

    def numpy_statistics(self, rho: np.ndarray) -> np.ndarray:
        w_re, w_im = self.bank()
        return w_re.values @ rho.real.reshape(-1) + w_im.values @ rho.imag.reshape(-1)

    def spec_entry(self) -> dict:
        return {"type": "statistics", "method": self.method, "rows": self.rows, "params": 0}


def mse_loss(predicted: Tensor, target) -> Tensor:
    """Mean of squared differences between prediction and a constant target."""
    target = np.asarray(target, dtype=float)
    if predicted.values.shape != target.shape:
        raise ShapeError(
            f"mse_loss length mismatch: prediction {predicted.values.shape} vs target {target.shape}"
        )
    diff = ad.add(predicted, constant(-target))
    return ad.mean(ad.mul(diff, diff))


class Adam:
    """Standard Adam with bias correction; deterministic given the gradients."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.reset()

    def reset(self):
        self.t = 0
        self.m = [np.zeros(p.values.shape) for p in self.params]
        self.v = [np.zeros(p.values.shape) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad[...] = 0.0

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"non-finite gradient in parameter {p.name!r}")
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
