"""Experiment pipelines behind the CLI commands.

Each pipeline resolves a configuration into state -> bases -> dataset ->
training (or crossbar replay), writes its artifacts atomically into the
output directory, and returns a serializable summary. All randomness flows
from the config's master seed through the documented sub-seed domains:
"state", "select", "acquire", "train"/"disc" (per repeat index), and
"crossbar".
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time

import numpy as np

from .config import (
    CrossbarSpec,
    ExperimentConfig,
    MeasurementSpec,
    atomic_write_text,
    write_resolved_config,
)
from .crossbar import run_network_on_crossbar
from .errors import ArgumentError, ConfigError
from .measurement import (
    BasisSet,
    MeasurementDataset,
    acquire,
    dataset_to_dict,
    enumerate_bases,
    filter_nonzero_expectation,
    load_dataset,
    save_dataset,
    select_bases,
)
from .networks import ARCHITECTURES, Network, build_discriminator, build_network
from .quantum import make_mixed_state, make_pure_state, save_state, state_to_dict
from .seeding import derive_seed
from .training import TrainConfig, TrainTrace, train_cgan, train_reconstruction, write_trace_csv

PURE_KINDS = ("ghz", "w", "random")


def prepare_state(cfg: ExperimentConfig):
    spec = cfg.state
    if spec.kind in PURE_KINDS:
        seed = derive_seed(cfg.seed, "state") if spec.kind == "random" else None
        return make_pure_state(spec.kind, spec.n_qubits, seed=seed)
    seed = derive_seed(cfg.seed, "state") if spec.kind == "random_mixture" else None
    return make_mixed_state(spec.kind, spec.n_qubits, p=spec.p, rank=spec.rank, seed=seed)


def candidate_pool(cfg: ExperimentConfig, state) -> BasisSet:
    """Non-zero-expectation pool over the configured alphabet."""
    full = enumerate_bases(cfg.state.n_qubits, cfg.measurement.alphabet)
    return filter_nonzero_expectation(state, full, cfg.measurement.epsilon)


def prepare_bases(cfg: ExperimentConfig, state, num_bases: int | None = None) -> BasisSet:
    """Resolve the measurement spec (optionally overriding the basis count)."""
    meas = cfg.measurement
    k = num_bases if num_bases is not None else meas.num_bases
    if meas.strategy == "explicit":
        ordered = list(meas.bases)
        if k is not None:
            if k > len(ordered):
                raise ArgumentError(
                    f"requested {k} bases but the explicit list has {len(ordered)}"
                )
            ordered = ordered[:k]
        if not ordered:
            raise ArgumentError("empty basis set")
        return BasisSet(cfg.state.n_qubits, tuple(ordered), {"strategy": "explicit"})
    pool = candidate_pool(cfg, state)
    if meas.strategy == "all_nonzero":
        if len(pool) == 0:
            raise ArgumentError("empty basis set: no bases with non-zero expectation")
        return pool
    if k is None:
        raise ArgumentError(f"strategy {meas.strategy} needs a basis count")
    return select_bases(
        pool, k, meas.strategy, state=state, seed=derive_seed(cfg.seed, "select")
    )


def prepare_dataset(cfg: ExperimentConfig, state, bases: BasisSet) -> MeasurementDataset:
    shots = cfg.measurement.shots
    seed = derive_seed(cfg.seed, "acquire") if shots is not None else None
    return acquire(cfg.measurement.method, state, bases, shots=shots, seed=seed)


def train_once(cfg: ExperimentConfig, state, bases: BasisSet, dataset: MeasurementDataset,
               repeat: int, architecture: str | None = None):
    """One seeded training run; returns (trace, network)."""
    arch = architecture or cfg.architecture
    seed = derive_seed(cfg.seed, "train", repeat)
    train_cfg = TrainConfig(**{**cfg.train.to_dict(), "seed": seed})
    n = cfg.state.n_qubits
    network = build_network(arch, n, cfg.measurement.method, bases, seed=seed)
    if arch == "CGAN":
        disc = build_discriminator(
            n, cfg.measurement.method, bases, seed=derive_seed(cfg.seed, "disc", repeat)
        )
        trace = train_cgan(network, disc, dataset, truth=state, config=train_cfg)
    else:
        trace = train_reconstruction(network, dataset, truth=state, config=train_cfg)
    return trace, network


def _dataset_hash(dataset: MeasurementDataset) -> str:
    payload = json.dumps(dataset_to_dict(dataset), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def _sidecar(cfg: ExperimentConfig, network: Network, dataset: MeasurementDataset) -> dict:
    return {
        "network": network.spec.to_dict(),
        "train": cfg.train.to_dict(),
        "dataset_sha256": _dataset_hash(dataset),
        "seed": cfg.seed,
        "architecture": cfg.architecture,
        "target_fidelity": cfg.target_fidelity,
    }


def _ensure_out(cfg: ExperimentConfig, out_dir: str | None) -> str:
    out = out_dir or cfg.out_dir
    if not out:
        raise ConfigError("no output directory: set out_dir in the config or pass --out")
    os.makedirs(out, exist_ok=True)
    return out


def _write_params(path, network: Network) -> None:
    arrays = {name: p.values for name, p in network.named_parameters().items()}
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def run_reconstruction(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Full reconstruct pipeline; writes trace/spec/rho/params/dataset files."""
    out = _ensure_out(cfg, out_dir)
    cfg = cfg.override(out_dir=out)
    write_resolved_config(os.path.join(out, "resolved_config.json"), cfg)
    state = prepare_state(cfg)
    bases = prepare_bases(cfg, state)
    dataset = prepare_dataset(cfg, state, bases)
    save_dataset(os.path.join(out, "dataset.json"), dataset)

    traces: list[TrainTrace] = []
    network = None
    for repeat in range(cfg.repeats):
        trace, network = train_once(cfg, state, bases, dataset, repeat)
        traces.append(trace)
        name = "trace.csv" if repeat == 0 else f"trace_r{repeat}.csv"
        write_trace_csv(os.path.join(out, name), trace)

    atomic_write_text(
        os.path.join(out, "spec.json"),
        json.dumps(_sidecar(cfg, network, dataset), indent=2) + "\n",
    )
    save_state(os.path.join(out, "rho.json"), traces[-1].rho)
    _write_params(os.path.join(out, "params.npz"), network)

    fidelities = [t.final_fidelity for t in traces]
    final_fidelity = float(np.mean(fidelities))
    converged = final_fidelity >= cfg.target_fidelity
    return {
        "final_fidelity": final_fidelity,
        "fidelities": fidelities,
        "iterations": traces[0].iterations,
        "converged": converged,
        "stop_reason": traces[0].stop_reason,
        "out_dir": out,
    }


def run_sweep(cfg: ExperimentConfig, out_dir: str | None = None,
              grid=None, target_fidelity=None, repeats=None) -> dict:
    """Minimal-basis-count sweep; writes sweep.json and sweep.csv."""
    if cfg.sweep is None and grid is None:
        raise ConfigError("sweep command needs a sweep section or --grid")
    grid = tuple(grid) if grid is not None else cfg.sweep.grid
    if list(grid) != sorted(grid):
        raise ConfigError("sweep grid must be sorted ascending")
    target = target_fidelity if target_fidelity is not None else (
        cfg.sweep.target_fidelity if cfg.sweep else 0.99
    )
    n_rep = repeats if repeats is not None else cfg.repeats
    out = _ensure_out(cfg, out_dir)
    cfg = cfg.override(out_dir=out, repeats=n_rep)
    write_resolved_config(os.path.join(out, "resolved_config.json"), cfg)

    state = prepare_state(cfg)
    cells = []
    minimal = None
    for k in grid:
        cell: dict = {"num_bases": int(k)}
        try:
            bases = prepare_bases(cfg, state, num_bases=k)
            dataset = prepare_dataset(cfg, state, bases)
        except (ArgumentError, ConfigError) as exc:
            cell.update({"failed": True, "reason": str(exc)})
            cells.append(cell)
            continue
        fids, iters_to_target = [], []
        for repeat in range(n_rep):
            trace, _ = train_once(cfg, state, bases, dataset, repeat)
            fids.append(trace.final_fidelity)
            iters_to_target.append(trace.first_iteration_at_fidelity(target))
        cell.update(
            {
                "failed": False,
                "fidelity_mean": float(np.mean(fids)),
                "fidelity_std": float(np.std(fids)),
                "fidelities": fids,
                "iterations_to_target": iters_to_target,
            }
        )
        cells.append(cell)
        if minimal is None and cell["fidelity_mean"] >= target:
            minimal = int(k)

    result = {
        "grid": [int(k) for k in grid],
        "target_fidelity": target,
        "repeats": n_rep,
        "cells": cells,
        "minimal_bases": minimal,
    }
    atomic_write_text(os.path.join(out, "sweep.json"), json.dumps(result, indent=2) + "\n")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["num_bases", "repeat", "final_fidelity", "iterations_to_target"])
    for cell in cells:
        if cell.get("failed"):
            writer.writerow([cell["num_bases"], "", "failed", ""])
            continue
        for r, (f, it) in enumerate(zip(cell["fidelities"], cell["iterations_to_target"])):
            writer.writerow([cell["num_bases"], r, repr(f), "" if it is None else it])
    atomic_write_text(os.path.join(out, "sweep.csv"), buf.getvalue())
    return result


def run_bench(cfg: ExperimentConfig, out_dir: str | None = None,
              architectures=None) -> dict:
    """Architecture comparison on one shared state/dataset/seed; writes bench.csv."""
    archs = tuple(a.upper() for a in (architectures or cfg.architectures or ARCHITECTURES))
    unknown = [a for a in archs if a not in ARCHITECTURES]
    if unknown:
        raise ConfigError(f"unsupported architectures requested: {unknown}")
    out = _ensure_out(cfg, out_dir)
    cfg = cfg.override(out_dir=out)
    write_resolved_config(os.path.join(out, "resolved_config.json"), cfg)

    state = prepare_state(cfg)
    bases = prepare_bases(cfg, state)
    dataset = prepare_dataset(cfg, state, bases)
    save_dataset(os.path.join(out, "dataset.json"), dataset)

    rows = []
    aggregates = []
    for arch in archs:
        fids = []
        for repeat in range(cfg.repeats):
            t0 = time.perf_counter()
            trace, _ = train_once(cfg, state, bases, dataset, repeat, architecture=arch)
            wall_ms = (time.perf_counter() - t0) * 1e3
            fid = trace.final_fidelity if trace.final_fidelity is not None else float("nan")
            fids.append(fid)
            rows.append(
                {
                    "architecture": arch,
                    "repeat": repeat,
                    "final_fidelity": fid,
                    "final_infidelity": 1.0 - fid,
                    "iterations": trace.iterations,
                    "wall_ms": wall_ms,
                }
            )
        aggregates.append(
            {
                "architecture": arch,
                "fidelity_mean": float(np.mean(fids)),
                "fidelity_std": float(np.std(fids)),
                "infidelity_mean": float(np.mean([1.0 - f for f in fids])),
            }
        )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["architecture", "repeat", "final_fidelity", "final_infidelity", "iterations", "wall_ms"]
    )
    for row in rows:
        writer.writerow(
            [
                row["architecture"],
                row["repeat"],
                repr(row["final_fidelity"]),
                repr(row["final_infidelity"]),
                row["iterations"],
                f"{row['wall_ms']:.3f}",
            ]
        )
    for agg in aggregates:
        writer.writerow(
            [agg["architecture"], "mean", repr(agg["fidelity_mean"]), repr(agg["infidelity_mean"]), "", ""]
        )
        writer.writerow([agg["architecture"], "std", repr(agg["fidelity_std"]), "", "", ""])
    atomic_write_text(os.path.join(out, "bench.csv"), buf.getvalue())
    return {"rows": rows, "aggregates": aggregates, "out_dir": out}


def load_trained_network(run_dir: str) -> tuple[Network, MeasurementDataset]:
    """Rebuild the network saved by run_reconstruction and load its weights."""
    spec_path = os.path.join(run_dir, "spec.json")
    params_path = os.path.join(run_dir, "params.npz")
    dataset_path = os.path.join(run_dir, "dataset.json")
    for path in (spec_path, params_path, dataset_path):
        if not os.path.exists(path):
            raise ConfigError(f"missing trained-network artifact: {path}")
    with open(spec_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    dataset = load_dataset(dataset_path)
    net_spec = sidecar["network"]
    network = build_network(
        net_spec["architecture"],
        net_spec["n_qubits"],
        net_spec["method"],
        dataset.basis_set,
        seed=net_spec["extras"]["seed"],
        use_bias=net_spec["extras"]["use_bias"],
    )
    with np.load(params_path) as arrays:
        network.load_parameters({name: arrays[name] for name in arrays.files})
    return network, dataset


def run_crossbar_eval(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Replay a completed run's network on the crossbar; writes crossbar_report.json."""
    if cfg.crossbar is None:
        raise ConfigError("crossbar-eval needs a crossbar section in the config")
    out = _ensure_out(cfg, out_dir)
    run_dir = cfg.crossbar.run_dir or out
    network, dataset = load_trained_network(run_dir)
    state = prepare_state(cfg)
    xbar_config = cfg.crossbar.to_crossbar_config(seed=derive_seed(cfg.seed, "crossbar"))
    report = run_network_on_crossbar(
        network, dataset, xbar_config, truth=state, repeats=cfg.crossbar.repeats
    )
    cfg = cfg.override(out_dir=out)
    write_resolved_config(os.path.join(out, "resolved_config.json"), cfg)
    atomic_write_text(
        os.path.join(out, "crossbar_report.json"), json.dumps(report.to_dict(), indent=2) + "\n"
    )
    return report.to_dict()
