"""Strict experiment configuration.

A single JSON document with an explicit schema_version drives every
command. Unknown fields are errors, not warnings; resolution expands all
defaults, and the fully resolved document is written next to every run's
outputs so that resolve -> run -> resolve is a fixed point.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

from .crossbar import CrossbarConfig
from .errors import ConfigError
from .measurement import ALPHABET_FULL, ALPHABET_XYZ, ALPHABETS, METHODS
from .networks import ARCHITECTURES
from .training import TrainConfig

SCHEMA_VERSION = 1

STATE_KINDS = ("ghz", "w", "random", "werner", "random_mixture")
PURE_KINDS = ("ghz", "w", "random")
SELECTION_STRATEGIES = ("all_nonzero", "ranked_magnitude", "random_subset", "explicit")


def _expect(doc: dict, allowed: set, where: str, problems: list) -> None:
    unknown = set(doc) - allowed
    for key in sorted(unknown):
        problems.append(f"{where}: unknown field {key!r}")


def _typed(doc, key, types, where, problems, required=False, default=None):
    if key not in doc or doc[key] is None:
        if required:
            problems.append(f"{where}: missing required field {key!r}")
        return default
    value = doc[key]
    if types is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
        problems.append(f"{where}: field {key!r} has type {type(value).__name__}")
        return default
    return value


@dataclass(frozen=True)
class StateSpec:
    kind: str
    n_qubits: int
    p: float | None = None
    rank: int | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.n_qubits, "p": self.p, "rank": self.rank}


@dataclass(frozen=True)
class MeasurementSpec:
    method: str
    alphabet: str
    strategy: str
    bases: tuple[str, ...] | None = None  # explicit ordered list
    num_bases: int | None = None
    epsilon: float = 1e-9
    shots: int | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alphabet": self.alphabet,
            "strategy": self.strategy,
            "bases": list(self.bases) if self.bases is not None else None,
            "num_bases": self.num_bases,
            "epsilon": self.epsilon,
            "shots": self.shots,
        }


@dataclass(frozen=True)
class SweepSpec:
    grid: tuple[int, ...]
    target_fidelity: float = 0.99

    def to_dict(self) -> dict:
        return {"grid": list(self.grid), "target_fidelity": self.target_fidelity}


@dataclass(frozen=True)
class CrossbarSpec:
    rows: int = 128
    cols: int = 128
    g_min: float = 1e-6
    g_max: float = 100e-6
    levels: int = 2**16
    read_noise_sigma: float = 0.0
    v_read: float = 0.2
    repeats: int = 100
    run_dir: str | None = None

    def to_crossbar_config(self, seed: int) -> CrossbarConfig:
        return CrossbarConfig(
            rows=self.rows,
            cols=self.cols,
            g_min=self.g_min,
            g_max=self.g_max,
            levels=self.levels,
            read_noise_sigma=self.read_noise_sigma,
            v_read=self.v_read,
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "g_min": self.g_min,
            "g_max": self.g_max,
            "levels": self.levels,
            "read_noise_sigma": self.read_noise_sigma,
            "v_read": self.v_read,
            "repeats": self.repeats,
            "run_dir": self.run_dir,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    state: StateSpec
    measurement: MeasurementSpec
    architecture: str
    train: TrainConfig
    repeats: int = 1
    target_fidelity: float = 0.99
    out_dir: str | None = None
    crossbar: CrossbarSpec | None = None
    sweep: SweepSpec | None = None
    architectures: tuple[str, ...] | None = None

    def override(self, seed: int | None = None, repeats: int | None = None,
                 out_dir: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if repeats is not None:
            cfg = replace(cfg, repeats=repeats)
        if out_dir is not None:
            cfg = replace(cfg, out_dir=out_dir)
        return cfg

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "repeats": self.repeats,
            "target_fidelity": self.target_fidelity,
            "out_dir": self.out_dir,
            "state": self.state.to_dict(),
            "measurement": self.measurement.to_dict(),
            "architecture": self.architecture,
            "train": self.train.to_dict(),
            "crossbar": self.crossbar.to_dict() if self.crossbar else None,
            "sweep": self.sweep.to_dict() if self.sweep else None,
            "architectures": list(self.architectures) if self.architectures else None,
        }


_TOP_FIELDS = {
    "schema_version", "seed", "repeats", "target_fidelity", "out_dir",
    "state", "measurement", "architecture", "train", "crossbar", "sweep",
    "architectures",
}
_STATE_FIELDS = {"kind", "n_qubits", "p", "rank"}
_MEAS_FIELDS = {"method", "alphabet", "strategy", "bases", "num_bases", "epsilon", "shots"}
_TRAIN_FIELDS = {
    "max_iterations", "learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon",
    "loss_threshold", "patience", "min_improvement", "fidelity_eval_every", "seed",
    "cgan_lambda_mse",
}
_XBAR_FIELDS = {
    "rows", "cols", "g_min", "g_max", "levels", "read_noise_sigma", "v_read",
    "repeats", "run_dir",
}
_SWEEP_FIELDS = {"grid", "target_fidelity"}


def _parse_state(doc, problems) -> StateSpec | None:
    if not isinstance(doc, dict):
        problems.append("state: must be an object")
        return None
    _expect(doc, _STATE_FIELDS, "state", problems)
    kind = _typed(doc, "kind", str, "state", problems, required=True)
    n = _typed(doc, "n_qubits", int, "state", problems, required=True)
    p = _typed(doc, "p", float, "state", problems)
    rank = _typed(doc, "rank", int, "state", problems)
    if kind is not None and kind not in STATE_KINDS:
        problems.append(f"state: unknown kind {kind!r}; expected one of {STATE_KINDS}")
    if kind == "werner" and p is None:
        problems.append("state: werner requires a mixing weight p")
    if kind == "random_mixture" and rank is None:
        problems.append("state: random_mixture requires a rank")
    if problems or kind is None or n is None:
        return None
    return StateSpec(kind=kind, n_qubits=n, p=p, rank=rank)


def _parse_measurement(doc, problems) -> MeasurementSpec | None:
    if not isinstance(doc, dict):
        problems.append("measurement: must be an object")
        return None
    _expect(doc, _MEAS_FIELDS, "measurement", problems)
    method = _typed(doc, "method", str, "measurement", problems, required=True)
    if method is not None and method not in METHODS:
        problems.append(f"measurement: method must be one of {METHODS}, got {method!r}")
    bases = doc.get("bases")
    if bases is not None:
        if not isinstance(bases, list) or not all(isinstance(s, str) for s in bases):
            problems.append("measurement: bases must be a list of strings")
            bases = None
        elif len(bases) == 0:
            problems.append("measurement: empty basis set")
            bases = None
    num_bases = _typed(doc, "num_bases", int, "measurement", problems)
    strategy = _typed(doc, "strategy", str, "measurement", problems)
    if strategy is None:
        if bases is not None:
            strategy = "explicit"
        elif num_bases is not None:
            strategy = "ranked_magnitude"
        else:
            strategy = "all_nonzero"
    if strategy not in SELECTION_STRATEGIES:
        problems.append(
            f"measurement: strategy must be one of {SELECTION_STRATEGIES}, got {strategy!r}"
        )
    if strategy == "explicit" and bases is None:
        problems.append("measurement: explicit strategy requires a bases list")
    if strategy != "explicit" and bases is not None:
        problems.append("measurement: a bases list requires the explicit strategy")
    if strategy in ("ranked_magnitude", "random_subset") and num_bases is None:
        problems.append(f"measurement: {strategy} requires num_bases")
    alphabet = _typed(doc, "alphabet", str, "measurement", problems)
    if alphabet is None and method is not None:
        alphabet = ALPHABET_XYZ if method == "M2" else ALPHABET_FULL
    if alphabet is not None and alphabet not in ALPHABETS:
        problems.append(f"measurement: alphabet must be one of {ALPHABETS}")
    epsilon = _typed(doc, "epsilon", float, "measurement", problems, default=1e-9)
    shots = _typed(doc, "shots", int, "measurement", problems)
    if shots is not None and shots <= 0:
        problems.append("measurement: shots must be a positive integer")
    if problems or method is None:
        return None
    return MeasurementSpec(
        method=method,
        alphabet=alphabet,
        strategy=strategy,
        bases=tuple(bases) if bases is not None else None,
        num_bases=num_bases,
        epsilon=epsilon,
        shots=shots,
    )


def _parse_train(doc, problems) -> TrainConfig | None:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        problems.append("train: must be an object")
        return None
    _expect(doc, _TRAIN_FIELDS, "train", problems)
    defaults = TrainConfig()
    kwargs = {}
    for name in _TRAIN_FIELDS:
        default = getattr(defaults, name)
        types = int if isinstance(default, int) else float
        kwargs[name] = _typed(doc, name, types, "train", problems, default=default)
    if problems:
        return None
    try:
        return TrainConfig(**kwargs)
    except Exception as exc:
        problems.append(f"train: {exc}")
        return None


def _parse_crossbar(doc, problems) -> CrossbarSpec | None:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        problems.append("crossbar: must be an object")
        return None
    _expect(doc, _XBAR_FIELDS, "crossbar", problems)
    defaults = CrossbarSpec()
    kwargs = {}
    for name in _XBAR_FIELDS:
        default = getattr(defaults, name)
        if name == "run_dir":
            kwargs[name] = _typed(doc, name, str, "crossbar", problems)
            continue
        types = int if isinstance(default, int) else float
        kwargs[name] = _typed(doc, name, types, "crossbar", problems, default=default)
    if problems:
        return None
    return CrossbarSpec(**kwargs)


def _parse_sweep(doc, problems) -> SweepSpec | None:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        problems.append("sweep: must be an object")
        return None
    _expect(doc, _SWEEP_FIELDS, "sweep", problems)
    grid = doc.get("grid")
    if not isinstance(grid, list) or not all(isinstance(k, int) and k >= 0 for k in grid):
        problems.append("sweep: grid must be a list of non-negative integers")
        return None
    if sorted(grid) != list(grid):
        problems.append("sweep: grid must be sorted ascending")
    target = _typed(doc, "target_fidelity", float, "sweep", problems, default=0.99)
    if problems:
        return None
    return SweepSpec(grid=tuple(grid), target_fidelity=target)


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    problems: list[str] = []
    _expect(doc, _TOP_FIELDS, "config", problems)
    version = _typed(doc, "schema_version", int, "config", problems, required=True)
    if version is not None and version != SCHEMA_VERSION:
        problems.append(f"config: schema_version {version} unsupported (expected {SCHEMA_VERSION})")
    seed = _typed(doc, "seed", int, "config", problems, required=True)
    if seed is not None and seed < 0:
        problems.append("config: seed must be non-negative")
    repeats = _typed(doc, "repeats", int, "config", problems, default=1)
    if repeats is not None and repeats < 1:
        problems.append("config: repeats must be >= 1")
    target = _typed(doc, "target_fidelity", float, "config", problems, default=0.99)
    out_dir = _typed(doc, "out_dir", str, "config", problems)
    arch = _typed(doc, "architecture", str, "config", problems, required=True)
    if arch is not None and arch.upper() not in ARCHITECTURES:
        problems.append(f"config: architecture must be one of {ARCHITECTURES}, got {arch!r}")

    state = _parse_state(doc.get("state"), problems) if "state" in doc else None
    if "state" not in doc:
        problems.append("config: missing required field 'state'")
    meas = _parse_measurement(doc.get("measurement"), problems) if "measurement" in doc else None
    if "measurement" not in doc:
        problems.append("config: missing required field 'measurement'")
    train = _parse_train(doc.get("train"), problems)
    xbar = _parse_crossbar(doc.get("crossbar"), problems)
    sweep = _parse_sweep(doc.get("sweep"), problems)

    arch_list = doc.get("architectures")
    if arch_list is not None:
        if not isinstance(arch_list, list) or not all(isinstance(a, str) for a in arch_list):
            problems.append("config: architectures must be a list of strings")
            arch_list = None

    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return ExperimentConfig(
        seed=seed,
        state=state,
        measurement=meas,
        architecture=arch.upper(),
        train=train,
        repeats=repeats,
        target_fidelity=target,
        out_dir=out_dir,
        crossbar=xbar,
        sweep=sweep,
        architectures=tuple(a.upper() for a in arch_list) if arch_list else None,
    )


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return config_from_dict(doc)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write a file via a same-directory temp name and atomic rename."""
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_resolved_config(path: str | os.PathLike, cfg: ExperimentConfig) -> None:
    atomic_write_text(path, json.dumps(cfg.to_dict(), indent=2) + "\n")
