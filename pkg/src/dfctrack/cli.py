"""Command-line front end.

Exit codes: 0 ok, 1 config error, 2 unstable, 3 divergence, 4 tune failure,
5 reproduction check failed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import UnstableClosedLoop, predict, signal_limit
from .config import ConfigError, controller_to_dict, load_config, plant_to_dict
from .core import DelayedFeedbackController, build_closed_loop
from .reproduce import reproduce, write_atomic
from .simulator import simulate, steady_state_error
from .spectrum import rightmost_roots
from .tuner import TuningFailure, anneal

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_DIVERGED, EXIT_TUNE, EXIT_CHECKS = 0, 1, 2, 3, 4, 5


def _fmt(v) -> str:
    if v is None:
        return "undefined"
    return " ".join(f"{x:.6g}" for x in np.ravel(v))


def _need_controller(cfg):
    if cfg.controller is None:
        raise ConfigError("controller: required for this command")
    return cfg.controller


def cmd_spectrum(cfg, out: Path, args) -> int:
    ctrl = _need_controller(cfg)
    res = rightmost_roots(build_closed_loop(cfg.plant, ctrl))
    write_atomic(out / "roots.csv", res.to_csv())
    if args.plots or cfg.plots:
        from .plotting import root_plot
        root_plot(res, out / "roots.svg")
    print(f"abscissa {res.abscissa:.6f}")
    return EXIT_OK if res.abscissa < 0 else EXIT_UNSTABLE


def cmd_simulate(cfg, out: Path, args) -> int:
    ctrl = _need_controller(cfg)
    try:
        traj = simulate(build_closed_loop(cfg.plant, ctrl), ctrl, horizon=cfg.horizon, step=cfg.step,
                        **cfg.signals)
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc
    write_atomic(out / "trajectory.csv", traj.to_csv())
    if args.plots or cfg.plots:
        from .plotting import trajectory_plots
        trajectory_plots(traj, out)
    if traj.diverged:
        print(f"diverged at t = {traj.times[-1]:.4g}")
        return EXIT_DIVERGED
    ss = steady_state_error(traj)
    state = "settled" if ss.settled else "not settled"
    print(f"final error {_fmt(traj.e[-1])} ({state})")
    return EXIT_OK


def cmd_tune(cfg, out: Path, args) -> int:
    if cfg.tune is None:
        raise ConfigError("tune: required for this command")
    spec = cfg.tune if args.seed is None else dataclasses.replace(cfg.tune, seed=args.seed)
    template = cfg.controller or DelayedFeedbackController(
        np.zeros((cfg.plant.r, cfg.plant.n)), np.zeros((cfg.plant.r, cfg.plant.m)),
        np.zeros((cfg.plant.m, cfg.plant.m)), tau=1.0, tau_q=0.0, p=1)
    try:
        ctrl, trace = anneal(spec, cfg.plant, template)
    except TuningFailure as exc:
        write_atomic(out / "trace.csv", exc.trace.to_csv())
        print(f"tuning failed: {exc}")
        return EXIT_TUNE
    write_atomic(out / "trace.csv", trace.to_csv())
    fragment = {"plant": plant_to_dict(cfg.plant), "controller": controller_to_dict(ctrl)}
    write_atomic(out / "tuned.json", json.dumps(fragment, indent=2) + "\n")
    if args.plots or cfg.plots:
        from .plotting import trace_plot
        trace_plot(trace, out / "trace.svg", threshold=spec.threshold)
    params = ", ".join(f"{n}={v:.6g}" for n, v in zip(spec.free_parameters, trace.best_parameters))
    print(f"abscissa {trace.final_abscissa:.6f} after {len(trace.costs)} iterations: {params}")
    return EXIT_OK if trace.reached_threshold else EXIT_TUNE


def cmd_predict(cfg, out: Path, args) -> int:
    ctrl = _need_controller(cfg)
    try:
        report = predict(cfg.plant, ctrl)
    except UnstableClosedLoop as exc:
        print(f"unstable: {exc}")
        return EXIT_UNSTABLE
    rows = [("d1_max_rejected_laplace_order", str(report.d1_max_rejected_laplace_order)),
            ("d2_step_rejected", str(report.d2_step_rejected)),
            ("d2_ramp_rejected", str(report.d2_ramp_rejected)),
            ("ramp_reference_tracked", str(report.ramp_reference_tracked)),
            ("condition_det", f"{report.condition_det:.6g}"),
            ("condition_full", str(report.condition_full))]
    rows += [(f"ss_error_{k}", _fmt(v)) for k, v in report.predicted_ss_error.items()]
    for channel, sig in cfg.signals.items():
        rows.append((f"ss_error_configured_{channel}", _fmt(signal_limit(cfg.plant, ctrl, channel, sig))))
    write_atomic(out / "prediction.csv", "quantity,value\n" + "".join(f"{k},{v}\n" for k, v in rows))
    for k, v in rows:
        print(f"{k}: {v}")
    return EXIT_OK


def cmd_reproduce(cfg, out: Path, args) -> int:
    checks = reproduce(out, plots=True)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print("failed: " + "; ".join(failed))
        return EXIT_CHECKS
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "simulate": cmd_simulate, "tune": cmd_tune,
            "predict": cmd_predict, "reproduce": cmd_reproduce}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfctrack", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON experiment file (not used by reproduce)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="annealing seed (overrides the config)")
    parser.add_argument("--plots", action="store_true", help="also write SVG plots")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        if args.command != "reproduce":
            if not args.config:
                raise ConfigError("--config is required")
            cfg = load_config(args.config)
        out = Path(args.out or (cfg.output_dir if cfg else "reproduce_out"))
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
