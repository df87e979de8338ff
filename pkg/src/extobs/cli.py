"""Command-line entry point.

Subcommands: ``simulate`` (full run, CSV + plot data), ``verify`` (the
check suite), ``gain`` (print the observer gain and coupling vector for a
config), ``plots`` (run and write only the plot-data files).

Exit codes: 0 success, 1 check failure or runtime divergence, 2
configuration error.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from .config import build_runtime, default_config, load_config
from .engine import emit_plots, simulate
from .errors import ConfigError, DivergenceError
from .verify import run_all


def _load(args):
    cfg = load_config(args.config) if args.config else default_config()
    updates = {}
    if getattr(args, "dt", None) is not None:
        updates["dt"] = args.dt
    if getattr(args, "t_final", None) is not None:
        updates["t_final"] = args.t_final
    return replace(cfg, **updates) if updates else cfg


def _add_common(p):
    p.add_argument("--config", help="YAML config path (defaults to the built-in demo)")
    p.add_argument("--dt", type=float, help="integration step override")
    p.add_argument("--t-final", dest="t_final", type=float, help="horizon override")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="extobs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the experiment, write CSVs and plot data")
    _add_common(p_sim)
    p_sim.add_argument("--out", default="out", help="output directory")
    p_sim.add_argument("--engine", default="auto", choices=["auto", "numba", "numpy"])

    p_ver = sub.add_parser("verify", help="run the verification suite")
    _add_common(p_ver)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--engine", default="auto", choices=["auto", "numba", "numpy"])
    p_ver.add_argument("--no-simulation", action="store_true",
                       help="skip the run-based margin checks")

    p_gain = sub.add_parser("gain", help="print the observer gain and coupling vector")
    _add_common(p_gain)

    p_plot = sub.add_parser("plots", help="run the experiment and write plot data only")
    _add_common(p_plot)
    p_plot.add_argument("--out", default="out", help="output directory")
    p_plot.add_argument("--engine", default="auto", choices=["auto", "numba", "numpy"])

    args = parser.parse_args(argv)

    try:
        cfg = _load(args)
        if args.command == "simulate":
            art = simulate(cfg, engine=args.engine)
            outdir = art.save(args.out)
            emit_plots(art, outdir)
            print(f"wrote {outdir}/(plant|filters|chain|observer).csv, plot data, summary.json")
            print(f"t_e = {art.summary.get('t_e')}, wall time {art.summary['wall_time_s']:.1f} s")
            return 0
        if args.command == "verify":
            results = run_all(cfg, seed=args.seed,
                              with_simulation=not args.no_simulation,
                              engine=args.engine)
            failed = [r for r in results if not r.ok]
            for r in results:
                print(f"[{'PASS' if r.ok else 'FAIL'}] {r.name}: {r.detail}")
            print(f"{len(results) - len(failed)}/{len(results)} checks passed")
            return 1 if failed else 0
        if args.command == "gain":
            setup = build_runtime(cfg)
            np.set_printoptions(precision=12, suppress=False)
            print(f"theta = {cfg.theta.tolist()}")
            print(f"beta  = {setup.fcfg.beta.tolist()}")
            print(f"L     = {setup.gain_true.tolist()}")
            print(f"Theta_AB = {setup.ext.theta_ab.tolist()}")
            return 0
        if args.command == "plots":
            art = simulate(cfg, engine=args.engine)
            outdir = emit_plots(art, args.out)
            print(f"wrote plot data to {outdir}")
            return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"runtime divergence: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
