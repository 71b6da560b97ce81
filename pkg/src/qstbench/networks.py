"""Architecture builders for the reconstruction networks.

Dense widths scale with qubit count: the fully connected stack is
(4^n/2, 4^n/2, 4^n, 4^n, 2*4^n); the convolutional path lifts a dense
projection onto a (2^(n-1), 2^(n-1), 2) grid and upscales once to
(2^n, 2^n) through transpose convolutions with fixed channel widths
64/64/32/2 (kernel 4; stride 2 on the upscale stage, 1 after). The
recurrent path feeds the statistics vector as a sequence of scalars through
two 50-unit tanh RNN layers. The conditional-adversarial generator is the
convolutional network; its discriminator is a small dense stack over the
concatenated (condition, candidate) statistics with a 1-unit logit head.

Dense and RNN layers carry biases; convolutions do not. Weights are
Glorot-uniform from a seeded stream, biases zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .autodiff import Tensor, concatenate, constant
from .errors import ArgumentError, DimensionError, UnsupportedArchitectureError
from .measurement import METHOD_M1, METHOD_M2, METHODS, BasisSet
from .nn import (
    ConvTranspose2d,
    Dense,
    DensityMatrixHead,
    InstanceNorm,
    LeakyReLU,
    Reshape,
    SimpleRNN,
    StatisticsHead,
)
from .seeding import derive_fast_rng

ARCHITECTURES = ("FCN", "CNN", "CGAN", "RNN")
_KNOWN_UNSUPPORTED = ("RBM", "SVAE", "TRANSFORMER")
MAX_NETWORK_QUBITS = 6

CNN_CHANNELS = (64, 64, 32, 2)
CNN_KERNEL = 4
RNN_UNITS = 50
DISCRIMINATOR_WIDTHS = (128, 128, 64, 64)


@dataclass
class NetworkSpec:
    architecture: str
    n_qubits: int
    method: str
    input_dim: int
    layers: list = field(default_factory=list)
    parameter_count: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "n_qubits": self.n_qubits,
            "method": self.method,
            "input_dim": self.input_dim,
            "layers": list(self.layers),
            "parameter_count": self.parameter_count,
            "extras": dict(self.extras),
        }


class Network:
    """A built reconstruction network: hidden blocks, then the physicality
    head, then the statistics head."""

    def __init__(self, spec: NetworkSpec, blocks, density: DensityMatrixHead,
                 statistics: StatisticsHead, seed: int):
        self.spec = spec
        self.blocks = blocks
        self.density = density
        self.statistics = statistics
        self._seed = seed
        self._reinit_count = 0

    def forward(self, x: np.ndarray):
        """Graph-building pass; returns (predicted statistics, rho_re, rho_im)."""
        h = constant(np.asarray(x, dtype=float), name="input")
        for block in self.blocks:
            h = block(h)
        rho_re, rho_im = self.density(h)
        pred = self.statistics(rho_re, rho_im)
        return pred, rho_re, rho_im

    def inference(self, x: np.ndarray, matvec=None):
        """Numpy-only replay; returns (predicted statistics, complex rho).

        ``matvec(name, matrix, vector)`` overrides every matrix-vector
        product of the trainable layers; activations, normalization, and the
        heads always run in floating point.
        """
        mm = matvec if matvec is not None else nn._default_matvec
        h = np.asarray(x, dtype=float)
        for block in self.blocks:
            h = block.inference(h, mm)
        rho = self.density.numpy_rho(h)
        pred = self.statistics.numpy_statistics(rho)
        return pred, rho

    def parameters(self):
        out = []
        for block in self.blocks:
            out.extend(block.params())
        return out

    def named_parameters(self) -> dict:
        return {p.name: p for p in self.parameters()}

    def load_parameters(self, values: dict) -> None:
        params = self.named_parameters()
        missing = set(params) - set(values)
        if missing:
            raise ArgumentError(f"missing parameter arrays: {sorted(missing)}")
        for name, p in params.items():
            arr = np.asarray(values[name], dtype=float)
            if arr.shape != p.values.shape:
                raise DimensionError(
                    f"parameter {name!r} has shape {arr.shape}, expected {p.values.shape}"
                )
            p.values[...] = arr

    def reinitialize(self) -> None:
        """Redraw all parameters from the next substream of the init seed.

        Biases get a small random offset on top of their zero init: an
        all-zero statistics vector (a zero-information dataset) would
        otherwise propagate exactly zero through every layer and keep the
        density head degenerate no matter how often weights are redrawn.
        """
        self._reinit_count += 1
        rng = derive_fast_rng(self._seed, "network-init", self._reinit_count)
        for block in self.blocks:
            block.init_params(rng)
        for p in self.parameters():
            if p.name.endswith(".bias"):
                p.values += 0.01 * rng.standard_normal(p.values.shape)


def _normalize_architecture(architecture: str) -> str:
    arch = architecture.upper()
    if arch in ARCHITECTURES:
        return arch
    if arch in _KNOWN_UNSUPPORTED:
        raise UnsupportedArchitectureError(
            f"architecture {architecture!r} is out of scope here; supported: {ARCHITECTURES}"
        )
    raise UnsupportedArchitectureError(
        f"unknown architecture {architecture!r}; supported: {ARCHITECTURES}"
    )


def _input_dim(method: str, bases: BasisSet) -> int:
    if method == METHOD_M1:
        return len(bases)
    return len(bases) * 2**bases.n_qubits


def _check_build_args(architecture, n_qubits, method, bases):
    arch = _normalize_architecture(architecture)
    if method not in METHODS:
        raise ArgumentError(f"unknown method {method!r}")
    if not 1 <= n_qubits <= MAX_NETWORK_QUBITS:
        raise DimensionError(f"networks support 1..{MAX_NETWORK_QUBITS} qubits, got {n_qubits}")
    if bases.n_qubits != n_qubits:
        raise DimensionError("basis set qubit count does not match the network")
    if len(bases) == 0:
        raise ArgumentError("empty basis set")
    return arch


def _layer_rng_factory(seed: int, domain: str):
    """Per-layer init substreams, bound at construction so that lazy
    materialization order cannot change the drawn values."""
    counter = iter(range(1_000_000))

    def next_thunk():
        index = next(counter)
        return lambda: derive_fast_rng(seed, domain, index)

    return next_thunk


def _fcn_blocks(next_rng, input_dim, n_qubits, use_bias):
    d4 = 4**n_qubits
    widths = [d4 // 2, d4 // 2, d4, d4, 2 * d4]
    blocks = []
    prev = input_dim
    for i, width in enumerate(widths):
        blocks.append(Dense(next_rng(), prev, width, use_bias=use_bias, name=f"dense{i + 1}"))
        if i < len(widths) - 1:
            blocks.append(LeakyReLU())
        prev = width
    dim = 2**n_qubits
    blocks.append(Reshape((dim, dim, 2)))
    return blocks


def _cnn_blocks(next_rng, input_dim, n_qubits, use_bias):
    d4 = 4**n_qubits
    half = 2 ** (n_qubits - 1)
    blocks = [
        Dense(next_rng(), input_dim, d4 // 2, use_bias=use_bias, name="dense1"),
        LeakyReLU(),
        Reshape((half, half, 2)),
    ]
    cin = 2
    for i, cout in enumerate(CNN_CHANNELS):
        stride = 2 if i == 0 else 1
        blocks.append(
            ConvTranspose2d(next_rng(), cin, cout, CNN_KERNEL, stride, name=f"convT{i + 1}")
        )
        if i < 2:  # the last two stages run bare, matching the narrowing head
            blocks.append(InstanceNorm(cout, name=f"inorm{i + 1}"))
            blocks.append(LeakyReLU())
        cin = cout
    return blocks


def _rnn_blocks(next_rng, input_dim, n_qubits, use_bias):
    dim = 2**n_qubits
    return [
        SimpleRNN(next_rng(), 1, RNN_UNITS, return_sequences=True, name="rnn1"),
        SimpleRNN(next_rng(), RNN_UNITS, RNN_UNITS, return_sequences=False, name="rnn2"),
        Dense(next_rng(), RNN_UNITS, 2 * 4**n_qubits, use_bias=True, name="dense1"),
        Reshape((dim, dim, 2)),
    ]


def build_network(
    architecture: str,
    n_qubits: int,
    method: str,
    bases: BasisSet,
    seed: int = 0,
    use_bias: bool = True,
) -> Network:
    """Construct and initialize a reconstruction network.

    The statistics head's operator bank is built lazily on first forward, so
    construction cost is dominated by parameter initialization.
    """
    arch = _check_build_args(architecture, n_qubits, method, bases)
    next_rng = _layer_rng_factory(seed, "network-init")
    input_dim = _input_dim(method, bases)

    if arch == "FCN":
        blocks = _fcn_blocks(next_rng, input_dim, n_qubits, use_bias)
    elif arch in ("CNN", "CGAN"):
        blocks = _cnn_blocks(next_rng, input_dim, n_qubits, use_bias)
    else:
        blocks = _rnn_blocks(next_rng, input_dim, n_qubits, use_bias)

    density = DensityMatrixHead(n_qubits)
    statistics = StatisticsHead(bases, method)
    layer_entries = [b.spec_entry() for b in blocks]
    layer_entries.append(density.spec_entry())
    layer_entries.append(statistics.spec_entry())
    spec = NetworkSpec(
        architecture=arch,
        n_qubits=n_qubits,
        method=method,
        input_dim=input_dim,
        layers=layer_entries,
        parameter_count=sum(b.parameter_count() for b in blocks),
        extras={
            "seed": seed,
            "use_bias": use_bias,
            "init": "glorot_uniform",
            "leaky_relu_slope": nn.LEAKY_RELU_SLOPE,
            "instance_norm_eps": nn.INSTANCE_NORM_EPS,
            "cnn_channels": list(CNN_CHANNELS),
            "cnn_kernel": CNN_KERNEL,
            "rnn_units": RNN_UNITS,
        },
    )
    return Network(spec, blocks, density, statistics, seed)


class Discriminator:
    """Dense critic over concatenated (condition, candidate) statistics."""

    def __init__(self, n_qubits: int, method: str, bases: BasisSet, seed: int = 0):
        if bases.n_qubits != n_qubits:
            raise DimensionError("basis set qubit count does not match the discriminator")
        self.input_dim = 2 * _input_dim(method, bases)
        self._seed = seed
        next_rng = _layer_rng_factory(seed, "discriminator-init")
        widths = DISCRIMINATOR_WIDTHS
        self.blocks = []
        prev = self.input_dim
        for i, width in enumerate(widths):
            self.blocks.append(Dense(next_rng(), prev, width, use_bias=True, name=f"disc.dense{i + 1}"))
            if i < 2:  # activations only between the two wide layers, head stays linear
                self.blocks.append(LeakyReLU())
            prev = width
        self.head = Dense(next_rng(), prev, 1, use_bias=True, name="disc.head")
        self.parameter_count = sum(b.parameter_count() for b in self.blocks) + self.head.parameter_count()

    def logit(self, condition: np.ndarray, candidate) -> Tensor:
        """Unnormalized scalar score; apply a sigmoid to read it as a probability."""
        cond = constant(np.asarray(condition, dtype=float))
        cand = candidate if isinstance(candidate, Tensor) else constant(np.asarray(candidate, dtype=float))
        h = concatenate([cond, cand])
        for block in self.blocks:
            h = block(h)
        return self.head(h).reshape(())

    def parameters(self):
        out = []
        for block in self.blocks:
            out.extend(block.params())
        out.extend(self.head.params())
        return out

    def spec_entries(self) -> list:
        return [b.spec_entry() for b in self.blocks] + [self.head.spec_entry()]


def build_discriminator(n_qubits: int, method: str, bases: BasisSet, seed: int = 0) -> Discriminator:
    if method not in METHODS:
        raise ArgumentError(f"unknown method {method!r}")
    return Discriminator(n_qubits, method, bases, seed)
