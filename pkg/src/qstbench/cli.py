"""Command-line front end.

Four subcommands wire the library into reproducible experiments:

    qstbench reconstruct  --config cfg.json --out DIR
    qstbench sweep-bases  --config cfg.json --out DIR [--grid 1,2,4] [--target-fidelity 0.99]
    qstbench bench-arch   --config cfg.json --out DIR [--architectures FCN,CNN]
    qstbench crossbar-eval --config cfg.json --out DIR

Exit codes: 0 success (for reconstruct: converged to the configured
fidelity), 1 error, 2 reconstruct finished without converging.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .config import load_config
from .errors import QstError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the experiment config JSON")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    parser.add_argument("--repeats", type=int, default=None, help="repeat count (overrides config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qstbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="state -> measurement -> reconstruction -> report")
    _add_common(p)

    p = sub.add_parser("sweep-bases", help="minimal basis count to reach a target fidelity")
    _add_common(p)
    p.add_argument("--grid", default=None, help="comma-separated basis counts, ascending")
    p.add_argument("--target-fidelity", type=float, default=None)

    p = sub.add_parser("bench-arch", help="compare architectures on one dataset")
    _add_common(p)
    p.add_argument("--architectures", default=None, help="comma-separated architecture names")

    p = sub.add_parser("crossbar-eval", help="replay a trained network on the analog crossbar")
    _add_common(p)
    return parser


def _load(args) -> "experiments.ExperimentConfig":
    cfg = load_config(args.config)
    return cfg.override(seed=args.seed, repeats=args.repeats, out_dir=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "reconstruct":
            summary = experiments.run_reconstruction(cfg, out_dir=args.out)
            print(
                f"final_fidelity={summary['final_fidelity']:.6f} "
                f"iterations={summary['iterations']} "
                f"converged={'true' if summary['converged'] else 'false'}"
            )
            return 0 if summary["converged"] else 2
        if args.command == "sweep-bases":
            grid = None
            if args.grid is not None:
                grid = tuple(int(tok) for tok in args.grid.split(",") if tok.strip())
            result = experiments.run_sweep(
                cfg,
                out_dir=args.out,
                grid=grid,
                target_fidelity=args.target_fidelity,
                repeats=args.repeats,
            )
            minimal = result["minimal_bases"]
            print(f"minimal_bases={'not found' if minimal is None else minimal}")
            return 0
        if args.command == "bench-arch":
            archs = None
            if args.architectures is not None:
                archs = tuple(tok.strip() for tok in args.architectures.split(",") if tok.strip())
            result = experiments.run_bench(cfg, out_dir=args.out, architectures=archs)
            for agg in result["aggregates"]:
                print(
                    f"{agg['architecture']}: infidelity_mean={agg['infidelity_mean']:.6f} "
                    f"fidelity_mean={agg['fidelity_mean']:.6f}"
                )
            return 0
        if args.command == "crossbar-eval":
            report = experiments.run_crossbar_eval(cfg, out_dir=args.out)
            print(
                f"fidelity_float={report['fidelity_float']:.6f} "
                f"fidelity_mean={report['fidelity_mean']:.6f} delta={report['delta']:.6e}"
            )
            return 0
        raise AssertionError(f"unhandled command {args.command}")
    except QstError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
