"""Command-line interface.

Subcommands: simulate a scenario config, sweep a tuning grid into margin
maps, run the oracle suite, replay a recorded log through an estimator.
Exit codes: 0 success, 2 divergence detected, 3 oracle failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np


def _cmd_simulate(args) -> int:
    from .scenario import load_scenario
    from .simulate import run_scenario

    sc = load_scenario(args.config)
    if args.duration is not None:
        sc.duration = args.duration
    if args.seed is not None:
        sc.seed = args.seed
    log = run_scenario(sc)
    os.makedirs(args.out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(args.config))[0]
    out = os.path.join(args.out_dir, f"{base}_run.csv")
    log.to_csv(out)
    print(f"wrote {out} ({log.data.shape[0]} rows)")
    if log.diverged:
        print(f"DIVERGED at step {log.diverged_step} "
              f"(t={log.t[-1]:.3f} s)")
        return 2
    return 0


def _cmd_sweep(args) -> int:
    from .mu import TuningGrid
    from .sweep import grid_sweep

    with open(args.config) as fh:
        cfg = json.load(fh)
    grid = TuningGrid(
        M_values=np.asarray(cfg.get("grid_M", np.linspace(0, 30, 31))),
        C_values=np.asarray(cfg.get("grid_C", np.linspace(0, 30, 31))))
    path = grid_sweep(int(cfg.get("n_agents", 2)), grid, args.out_dir,
                      n_freqs=int(cfg.get("n_freqs", 80)),
                      n_jobs=args.jobs, polish=bool(cfg.get("polish", True)))
    print(f"wrote {path}")
    return 0


def _cmd_oracles(args) -> int:
    from .oracles import oracle_suite

    report = oracle_suite(mutate=args.mutate)
    print(report.summary())
    return 0 if report.all_passed else 3


def _cmd_replay(args) -> int:
    from .scenario import load_scenario, scenario_from_dict
    from .simulate import RunLog, replay_log

    log = RunLog.from_csv(args.log)
    if args.config:
        sc = load_scenario(args.config)
    else:
        n_agents = sum(1 for c in log.columns if c.endswith("_fsm"))
        sc = scenario_from_dict({"n_agents": n_agents,
                                 "duration": float(log.t[-1] or 1.0),
                                 "estimator": args.estimator})
    sc.estimator = args.estimator
    out = replay_log(log, sc, agent=args.agent)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "replay_estimates.csv")
    with open(path, "w") as fh:
        fh.write("t,Fhat_x,Fhat_y,Fhat_z\n")
        for row in out:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="swarmlift",
        description="Collaborative multirotor payload transport: simulation "
                    "and robust admittance tuning")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario config")
    sim.add_argument("config")
    sim.add_argument("--out-dir", default=".")
    sim.add_argument("--duration", type=float, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.set_defaults(fn=_cmd_simulate)

    sw = sub.add_parser("sweep", help="margin map over a tuning grid")
    sw.add_argument("config")
    sw.add_argument("--out-dir", default=".")
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(fn=_cmd_sweep)

    orc = sub.add_parser("oracles", help="run the independent oracle suite")
    orc.add_argument("--mutate", default=None,
                     help="deliberately inject a dynamics defect "
                          "(gravity_sign | coriolis_sign | drag_sign)")
    orc.set_defaults(fn=_cmd_oracles)

    rp = sub.add_parser("replay", help="re-run an estimator over a log")
    rp.add_argument("log")
    rp.add_argument("--estimator", default="ekf", choices=["ekf", "ukf"])
    rp.add_argument("--agent", type=int, default=1)
    rp.add_argument("--config", default=None)
    rp.add_argument("--out-dir", default=".")
    rp.set_defaults(fn=_cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
