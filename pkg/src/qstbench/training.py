"""Single-state reconstruction training.

The network input is the measured-statistics vector itself, held constant
across iterations; each step runs forward, compares predicted statistics to
the measured ones under MSE, backpropagates, and applies Adam. Trace rows
record the model state after k parameter updates (row 0 is the untrained
model); fidelity against a ground-truth state, when one is supplied, is
evaluated on the logged rows only.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ArgumentError, DegenerateParameterError, DivergenceError, ValidationError
from .measurement import MeasurementDataset
from .networks import Discriminator, Network
from .nn import Adam, mse_loss
from .quantum import DensityMatrix, PureState, fidelity


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 5000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    loss_threshold: float = 1e-10
    patience: int = 200
    min_improvement: float = 1e-12
    fidelity_eval_every: int = 10
    seed: int = 0
    cgan_lambda_mse: float = 100.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ArgumentError("max_iterations must be positive")
        for name in ("learning_rate", "adam_epsilon", "loss_threshold", "min_improvement"):
            if getattr(self, name) <= 0:
                raise ArgumentError(f"{name} must be positive")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ArgumentError(f"{name} must lie strictly between 0 and 1")
        if self.patience < 1 or self.fidelity_eval_every < 1:
            raise ArgumentError("patience and fidelity_eval_every must be positive")
        if self.cgan_lambda_mse < 0:
            raise ArgumentError("cgan_lambda_mse must be non-negative")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "loss_threshold": self.loss_threshold,
            "patience": self.patience,
            "min_improvement": self.min_improvement,
            "fidelity_eval_every": self.fidelity_eval_every,
            "seed": self.seed,
            "cgan_lambda_mse": self.cgan_lambda_mse,
        }


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loss: float
    fidelity: float | None
    elapsed_ms: float


@dataclass
class TrainTrace:
    records: list[TraceRecord] = field(default_factory=list)
    rho: DensityMatrix | None = None
    converged: bool = False
    stop_reason: str = "max_iterations"
    iterations: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss

    @property
    def final_fidelity(self) -> float | None:
        return self.records[-1].fidelity

    def first_iteration_at_fidelity(self, target: float) -> int | None:
        for rec in self.records:
            if rec.fidelity is not None and rec.fidelity >= target:
                return rec.iteration
        return None


def _clipped_fidelity(truth, rho: DensityMatrix) -> float:
    return min(1.0, max(0.0, fidelity(truth, rho)))


class _Recorder:
    def __init__(self, truth, n_qubits: int):
        self.truth = truth
        self.n_qubits = n_qubits
        self.records: list[TraceRecord] = []
        self.start = time.perf_counter()
        self.last_rho: DensityMatrix | None = None

    def log(self, iteration: int, loss: float, rho_re, rho_im) -> None:
        entries = rho_re.values + 1j * rho_im.values
        rho = DensityMatrix(self.n_qubits, entries)
        self.last_rho = rho
        fid = None
        if self.truth is not None and np.all(np.isfinite(entries)):
            try:
                fid = _clipped_fidelity(self.truth, rho)
            except (ValidationError, np.linalg.LinAlgError):
                fid = None  # diverged model; leave the fidelity cell empty
        elapsed = (time.perf_counter() - self.start) * 1e3
        self.records.append(TraceRecord(iteration, loss, fid, elapsed))


def _forward_with_recovery(network: Network, x: np.ndarray, trace_warnings: list, adam: Adam):
    for _ in range(3):
        try:
            return network.forward(x)
        except DegenerateParameterError:
            trace_warnings.append("degenerate density parameterization; reinitialized network")
            network.reinitialize()
            adam.params = list(network.parameters())  # reinit swaps tensors
            adam.reset()
    raise DegenerateParameterError("network stayed degenerate after repeated reinitialization")


def train_reconstruction(
    network: Network,
    dataset: MeasurementDataset,
    truth: PureState | DensityMatrix | None = None,
    config: TrainConfig = TrainConfig(),
) -> TrainTrace:
    """Fit the network to one dataset; returns the trace and final state."""
    if dataset.method != network.spec.method:
        raise ArgumentError(
            f"dataset method {dataset.method} does not match network {network.spec.method}"
        )
    target = dataset.training_vector()
    x = target.copy()
    if target.size != network.spec.input_dim:
        raise ArgumentError(
            f"dataset vector length {target.size} does not match network input "
            f"{network.spec.input_dim}"
        )

    trace = TrainTrace()
    rec = _Recorder(truth, network.spec.n_qubits)
    adam = Adam(
        network.parameters(),
        lr=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_epsilon,
    )

    pred, rho_re, rho_im = _forward_with_recovery(network, x, trace.warnings, adam)
    loss = mse_loss(pred, target)
    rec.log(0, float(loss.values), rho_re, rho_im)

    best = math.inf
    stall = 0
    it = 0
    while it < config.max_iterations:
        it += 1
        loss_val = float(loss.values)
        if not math.isfinite(loss_val):
            trace.stop_reason = "diverged"
            it -= 1
            break
        adam.zero_grad()
        loss.backward()
        try:
            adam.step()
        except DivergenceError as exc:
            trace.warnings.append(str(exc))
            trace.stop_reason = "diverged"
            it -= 1
            break

        pred, rho_re, rho_im = _forward_with_recovery(network, x, trace.warnings, adam)
        loss = mse_loss(pred, target)
        post = float(loss.values)
        if it % config.fidelity_eval_every == 0 and it != config.max_iterations:
            rec.log(it, post, rho_re, rho_im)

        if post < config.loss_threshold:
            trace.stop_reason = "loss_threshold"
            trace.converged = True
            break
        if best - post > config.min_improvement:
            best = post
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                trace.stop_reason = "patience"
                break

    if not rec.records or rec.records[-1].iteration != it:
        rec.log(it, float(loss.values), rho_re, rho_im)
    trace.records = rec.records
    trace.rho = rec.last_rho
    trace.iterations = it
    return trace


def train_cgan(
    generator: Network,
    discriminator: Discriminator,
    dataset: MeasurementDataset,
    truth: PureState | DensityMatrix | None = None,
    config: TrainConfig = TrainConfig(),
) -> TrainTrace:
    """Adversarial reconstruction: alternating critic and generator updates.

    The critic scores (condition, statistics) pairs; the generator descends
    its adversarial term plus a reconstruction MSE weighted by
    ``cgan_lambda_mse``. The trace's loss column records the reconstruction
    MSE so traces are comparable across architectures; early stopping and the
    converged flag are driven by that same quantity.
    """
    if dataset.method != generator.spec.method:
        raise ArgumentError(
            f"dataset method {dataset.method} does not match generator {generator.spec.method}"
        )
    target = dataset.training_vector()
    cond = target.copy()

    trace = TrainTrace()
    rec = _Recorder(truth, generator.spec.n_qubits)
    adam_g = Adam(
        generator.parameters(),
        lr=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_epsilon,
    )
    adam_d = Adam(
        discriminator.parameters(),
        lr=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_epsilon,
    )

    def zero_all():
        adam_g.zero_grad()
        adam_d.zero_grad()

    pred, rho_re, rho_im = _forward_with_recovery(generator, cond, trace.warnings, adam_g)
    rec.log(0, float(mse_loss(pred, target).values), rho_re, rho_im)

    best = math.inf
    stall = 0
    saturated_streak = 0
    it = 0
    while it < config.max_iterations:
        it += 1
        # critic ascends log D(real) + log(1 - D(fake)); minimized as softplus
        fake_const = pred.detach()
        logit_real = discriminator.logit(cond, target)
        logit_fake = discriminator.logit(cond, fake_const)
        d_loss = ad.add(ad.softplus(ad.neg(logit_real)), ad.softplus(logit_fake))
        zero_all()
        d_loss.backward()
        try:
            adam_d.step()
        except DivergenceError as exc:
            trace.warnings.append(str(exc))
            trace.stop_reason = "diverged"
            it -= 1
            break

        if float(d_loss.values) < 1e-6:
            saturated_streak += 1
            if saturated_streak == 100:
                trace.warnings.append(
                    f"discriminator saturated for 100 consecutive steps at iteration {it}"
                )
        else:
            saturated_streak = 0

        # generator descends log(1 - D(G(cond))) + lambda * MSE
        pred, rho_re, rho_im = _forward_with_recovery(generator, cond, trace.warnings, adam_g)
        g_mse = mse_loss(pred, target)
        g_adv = ad.neg(ad.softplus(discriminator.logit(cond, pred)))
        g_loss = ad.add(g_adv, ad.mul(g_mse, ad.constant(config.cgan_lambda_mse)))
        if not math.isfinite(float(g_loss.values)):
            trace.stop_reason = "diverged"
            it -= 1
            break
        zero_all()
        g_loss.backward()
        try:
            adam_g.step()
        except DivergenceError as exc:
            trace.warnings.append(str(exc))
            trace.stop_reason = "diverged"
            it -= 1
            break

        pred, rho_re, rho_im = _forward_with_recovery(generator, cond, trace.warnings, adam_g)
        mse_val = float(mse_loss(pred, target).values)
        if it % config.fidelity_eval_every == 0 and it != config.max_iterations:
            rec.log(it, mse_val, rho_re, rho_im)

        if mse_val < config.loss_threshold:
            trace.stop_reason = "loss_threshold"
            trace.converged = True
            break
        if best - mse_val > config.min_improvement:
            best = mse_val
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                trace.stop_reason = "patience"
                break

    final_mse = float(mse_loss(pred, target).values)
    if not rec.records or rec.records[-1].iteration != it:
        rec.log(it, final_mse, rho_re, rho_im)
    trace.records = rec.records
    trace.rho = rec.last_rho
    trace.iterations = it
    return trace


# ---------------------------------------------------------------------------
# trace serialization
# ---------------------------------------------------------------------------


def trace_to_csv_text(trace: TrainTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "loss", "fidelity", "elapsed_ms"])
    for r in trace.records:
        fid = "" if r.fidelity is None else repr(r.fidelity)
        writer.writerow([r.iteration, repr(r.loss), fid, f"{r.elapsed_ms:.3f}"])
    return buf.getvalue()


def write_trace_csv(path, trace: TrainTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trace_to_csv_text(trace))
