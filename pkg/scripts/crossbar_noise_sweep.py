#!/usr/bin/env python3
"""Crossbar degradation grid: conductance levels x read noise.

Trains one GHZ reconstruction network, then replays its inference on the
analog crossbar over a grid of quantization levels and read-noise sigmas,
printing the fidelity degradation per cell as CSV.
"""

import argparse
import csv
import sys

from qstbench.crossbar import CrossbarConfig, run_network_on_crossbar
from qstbench.measurement import BasisSet, acquire
from qstbench.networks import build_network
from qstbench.quantum import ghz_state
from qstbench.training import TrainConfig, train_reconstruction


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qubits", type=int, default=3)
    ap.add_argument("--levels", default="2,16,256,65536")
    ap.add_argument("--sigmas", default="0,0.01,0.02,0.05")
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    n = args.qubits
    g = ghz_state(n)
    bases = BasisSet(n, ("Z" * n, "X" * n))
    ds = acquire("M2", g, bases)
    net = build_network("FCN", n, "M2", bases, seed=args.seed)
    trace = train_reconstruction(
        net, ds, truth=g,
        config=TrainConfig(max_iterations=600, fidelity_eval_every=10, seed=args.seed),
    )
    print(f"# trained fidelity {trace.final_fidelity:.6f}", file=sys.stderr)

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["levels", "sigma", "fidelity_float", "fidelity_mean",
                     "fidelity_std", "delta", "tiles", "mvm_reads"])
    for levels in (int(tok) for tok in args.levels.split(",")):
        for sigma in (float(tok) for tok in args.sigmas.split(",")):
            cfg = CrossbarConfig(levels=levels, read_noise_sigma=sigma, seed=args.seed)
            rep = run_network_on_crossbar(net, ds, cfg, truth=g, repeats=args.repeats)
            writer.writerow([
                levels, sigma, f"{rep.fidelity_float:.6f}", f"{rep.fidelity_mean:.6f}",
                f"{rep.fidelity_std:.6f}", f"{rep.delta:.6e}", rep.tiles, rep.mvm_reads,
            ])


if __name__ == "__main__":
    main()
