"""Analog crossbar inference simulator.

Trained weight matrices are programmed onto arrays of two conductances per
weight (differential encoding), quantized to a configurable number of
uniformly spaced levels, and read back through noisy analog multiply-and-
accumulate: the output current on each line is the conductance-weighted sum
of the applied read voltages. Matrices larger than one array are tiled and
the partial sums accumulated exactly. Activations, normalization, and the
physicality/statistics heads stay in floating point; only the matrix-vector
products are routed through the arrays.

Deliberately excluded nonidealities: IR drop, wire resistance, sneak paths,
and converter quantization. The model isolates weight storage (quantization)
and read noise (multiplicative Gaussian per cell per read).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DimensionError, ShapeError, UnsupportedLayerError
from .measurement import MeasurementDataset
from .networks import Network
from .nn import ConvTranspose2d, Dense, InstanceNorm, LeakyReLU, Reshape, SimpleRNN
from .quantum import DensityMatrix, PureState, fidelity
from .seeding import derive_rng


@dataclass(frozen=True)
class CrossbarConfig:
    rows: int = 128
    cols: int = 128
    g_min: float = 1e-6
    g_max: float = 100e-6
    levels: int = 2**16
    read_noise_sigma: float = 0.0
    v_read: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ArgumentError("array dimensions must be positive")
        if not 0 < self.g_min < self.g_max:
            raise ArgumentError("conductance bounds must satisfy 0 < g_min < g_max")
        if self.levels < 2:
            raise ArgumentError("need at least two programmable conductance levels")
        if self.read_noise_sigma < 0:
            raise ArgumentError("read noise sigma must be non-negative")
        if self.v_read <= 0:
            raise ArgumentError("read voltage must be positive")

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "g_min": self.g_min,
            "g_max": self.g_max,
            "levels": self.levels,
            "read_noise_sigma": self.read_noise_sigma,
            "v_read": self.v_read,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TilePlacement:
    row_offset: int  # along the input axis
    col_offset: int  # along the output axis
    height: int
    width: int


@dataclass
class ProgrammedCrossbar:
    """Conductance pair arrays holding one weight matrix, possibly tiled.

    Conductances are stored input-major, shape (n_in, n_out): word lines carry
    the input voltages, bit lines collect the output currents.
    """

    config: CrossbarConfig
    g_plus: np.ndarray
    g_minus: np.ndarray
    weight_scale: float
    tile_map: list[TilePlacement] = field(default_factory=list)

    @property
    def n_in(self) -> int:
        return self.g_plus.shape[0]

    @property
    def n_out(self) -> int:
        return self.g_plus.shape[1]

    def dequantized_weights(self) -> np.ndarray:
        """Weights as actually stored, back in weight units, shape (n_out, n_in)."""
        return ((self.g_plus - self.g_minus) / self.weight_scale).T


def _quantize(g: np.ndarray, config: CrossbarConfig) -> np.ndarray:
    step = (config.g_max - config.g_min) / (config.levels - 1)
    q = config.g_min + np.rint((g - config.g_min) / step) * step
    return np.clip(q, config.g_min, config.g_max)


def program_weights(w: np.ndarray, config: CrossbarConfig) -> ProgrammedCrossbar:
    """Map a real weight matrix onto differential conductance pairs.

    Positive weights raise g_plus above g_min (g_minus parked at g_min),
    negative weights symmetrically; the scale maps max|w| to the full
    conductance swing. All-zero input gets unit scale with every cell at
    g_min. Both conductance matrices are rounded to the nearest of the
    configured uniformly spaced levels.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ShapeError(f"weight matrix must be 2-D, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ArgumentError("weights must be finite")
    n_out, n_in = w.shape
    w_max = float(np.max(np.abs(w)))
    if w_max == 0.0:
        weight_scale = 1.0
        g_plus = np.full((n_in, n_out), config.g_min)
        g_minus = np.full((n_in, n_out), config.g_min)
    else:
        weight_scale = (config.g_max - config.g_min) / w_max
        wt = w.T  # input-major storage
        g_plus = _quantize(config.g_min + weight_scale * np.maximum(wt, 0.0), config)
        g_minus = _quantize(config.g_min + weight_scale * np.maximum(-wt, 0.0), config)

    tiles = [
        TilePlacement(r, c, min(config.rows, n_in - r), min(config.cols, n_out - c))
        for r in range(0, n_in, config.rows)
        for c in range(0, n_out, config.cols)
    ]
    return ProgrammedCrossbar(config, g_plus, g_minus, weight_scale, tiles)


def analog_mvm(
    xbar: ProgrammedCrossbar,
    x: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One analog matrix-vector product, returned in weight units.

    Each tile contributes bit-line currents sum_i (g+~ - g-~)_ij * v_read *
    x_i with per-cell multiplicative read noise g~ = g (1 + eta),
    eta ~ N(0, sigma); partial sums accumulate exactly across tiles and the
    result is divided by (weight_scale * v_read). Pass an rng to make noisy
    reads independent across calls; with none given the stream restarts from
    the config seed on every call.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (xbar.n_in,):
        raise ShapeError(f"input length {x.shape} does not match logical columns ({xbar.n_in},)")
    cfg = xbar.config
    sigma = cfg.read_noise_sigma
    if sigma > 0.0 and rng is None:
        rng = derive_rng(cfg.seed, "crossbar-read")
    y = np.zeros(xbar.n_out)
    for tile in xbar.tile_map:
        rs = slice(tile.row_offset, tile.row_offset + tile.height)
        cs = slice(tile.col_offset, tile.col_offset + tile.width)
        gp = xbar.g_plus[rs, cs]
        gm = xbar.g_minus[rs, cs]
        if sigma > 0.0:
            gp = gp * (1.0 + sigma * rng.standard_normal(gp.shape))
            gm = gm * (1.0 + sigma * rng.standard_normal(gm.shape))
        current = (gp - gm).T @ (cfg.v_read * x[rs])
        y[cs] += current
    return y / (xbar.weight_scale * cfg.v_read)


@dataclass
class DegradationReport:
    config: CrossbarConfig
    repeats: int
    fidelity_float: float
    fidelity_mean: float
    fidelity_std: float
    delta: float
    tiles: int
    mvm_reads: int
    fidelities: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "repeats": self.repeats,
            "fidelity_float": self.fidelity_float,
            "fidelity_mean": self.fidelity_mean,
            "fidelity_std": self.fidelity_std,
            "delta": self.delta,
            "tiles": self.tiles,
            "mvm_reads": self.mvm_reads,
        }


_PASSTHROUGH_BLOCKS = (LeakyReLU, Reshape, InstanceNorm)


def _programmable_matrices(network: Network, input_dim: int) -> dict[str, np.ndarray]:
    """Every matrix the network's inference will route through ``matvec``."""
    matrices: dict[str, np.ndarray] = {}
    spatial = None
    # track the spatial shape entering each conv so lowering is well-defined
    for block in network.blocks:
        if isinstance(block, Dense):
            matrices[block.name] = block.weight.values
        elif isinstance(block, SimpleRNN):
            matrices[f"{block.name}.w_x"] = block.w_x.values
            matrices[f"{block.name}.w_h"] = block.w_h.values
        elif isinstance(block, ConvTranspose2d):
            if spatial is None:
                raise UnsupportedLayerError(
                    f"cannot infer spatial input of {block.name} for dense lowering"
                )
            matrices[block.name] = block.dense_equivalent(spatial)
            spatial = (spatial[0] * block.stride, spatial[1] * block.stride)
        elif isinstance(block, Reshape) and len(block.shape) == 3:
            spatial = (block.shape[0], block.shape[1])
        elif isinstance(block, _PASSTHROUGH_BLOCKS):
            pass
        else:
            raise UnsupportedLayerError(
                f"block {type(block).__name__} cannot be mapped onto the crossbar"
            )
    return matrices


def run_network_on_crossbar(
    network: Network,
    dataset: MeasurementDataset,
    config: CrossbarConfig,
    truth: PureState | DensityMatrix,
    repeats: int = 100,
) -> DegradationReport:
    """Replay trained inference with every matrix-vector product on crossbars.

    Reports the reconstruction fidelity of the analog replays (mean and std
    over `repeats` independent noise draws, each with its own read stream
    derived from (config.seed, repeat)) against the floating-point fidelity,
    plus tile and read counts as a workload proxy.
    """
    if repeats < 1:
        raise ArgumentError("repeats must be positive")
    x = dataset.training_vector()
    if x.size != network.spec.input_dim:
        raise DimensionError("dataset does not match the network input width")

    _, rho_float = network.inference(x)
    fidelity_float = fidelity(truth, DensityMatrix(network.spec.n_qubits, rho_float))

    matrices = _programmable_matrices(network, x.size)
    programmed = {name: program_weights(m, config) for name, m in matrices.items()}
    tiles = sum(len(p.tile_map) for p in programmed.values())

    reads = 0
    fidelities = []
    for repeat in range(repeats):
        rng = derive_rng(config.seed, "crossbar-read", repeat)

        def matvec(name, matrix, vec):
            nonlocal reads
            xbar = programmed[name]
            reads += len(xbar.tile_map)
            return analog_mvm(xbar, vec, rng)

        _, rho = network.inference(x, matvec=matvec)
        fidelities.append(fidelity(truth, DensityMatrix(network.spec.n_qubits, rho)))

    mean = float(np.mean(fidelities))
    std = float(np.std(fidelities))
    return DegradationReport(
        config=config,
        repeats=repeats,
        fidelity_float=float(fidelity_float),
        fidelity_mean=mean,
        fidelity_std=std,
        delta=float(fidelity_float - mean),
        tiles=tiles,
        mvm_reads=reads,
        fidelities=[float(f) for f in fidelities],
    )


def save_report(path, report: DegradationReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
