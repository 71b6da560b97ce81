#!/usr/bin/env python3
"""Minimal measurement-basis counts for three canonical state families.

Sweeps the probability-based basis count for GHZ, W, and a random pure state
at a fixed qubit number and prints the smallest count whose mean final
fidelity reaches the target. The GHZ sweep uses the {Z^n, X^n} pair as its
ordered candidate list; the others rank the non-zero-expectation pool by
magnitude.
"""

import argparse
import json

from qstbench.config import config_from_dict
from qstbench.experiments import run_sweep


def sweep_config(state, measurement, grid, n, seed, iterations, target, repeats):
    return config_from_dict({
        "schema_version": 1,
        "seed": seed,
        "repeats": repeats,
        "state": dict(state, n_qubits=n),
        "measurement": dict(measurement, method="M2"),
        "architecture": "FCN",
        "train": {"max_iterations": iterations, "fidelity_eval_every": 50},
        "sweep": {"grid": list(grid), "target_fidelity": target},
    })


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="output directory root")
    ap.add_argument("--qubits", type=int, default=4)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--target", type=float, default=0.99)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    n = args.qubits
    studies = {
        "ghz": (
            {"kind": "ghz"},
            {"bases": ["Z" * n, "X" * n]},
            [1, 2],
        ),
        "w": (
            {"kind": "w"},
            {"strategy": "ranked_magnitude", "num_bases": 2},
            [2, 4, 6, 8, 12],
        ),
        "random_pure": (
            {"kind": "random"},
            {"strategy": "ranked_magnitude", "num_bases": 4},
            [4, 6, 8, 12, 16, 24],
        ),
    }
    minima = {}
    for name, (state, measurement, grid) in studies.items():
        cfg = sweep_config(state, measurement, grid, n, args.seed,
                           args.iterations, args.target, args.repeats)
        result = run_sweep(cfg, out_dir=f"{args.out}/{name}")
        minima[name] = result["minimal_bases"]
        print(f"{name}: minimal_bases={result['minimal_bases']}")
    print(json.dumps(minima))


if __name__ == "__main__":
    main()
