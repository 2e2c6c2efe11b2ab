"""Command-line entry point: run, sweep, selftest.

`run` executes one learning run plus its known-model baseline and writes the
trajectory table, belief snapshots, a summary, and figures into the output
directory.  `sweep` produces the grid-refinement tables.  `selftest` runs
the analytic-oracle checks.  Exit codes: 0 success, 2 config/validation
error, 3 numerical divergence (1 for a failed selftest).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import figures, report, selftest
from .controller import run_online, run_reference
from .harness import a_error, run_sweep
from .problem import (DivergenceError, ProblemSpec, ValidationError, cost_of,
                      validate_spec)

_REQUIRED_KEYS = ("n", "m", "a_true", "b", "q", "r", "q_f", "horizon", "x0")
_OPTIONAL_KEYS = ("dt", "dt_list", "scheme_order", "p_list", "steps_per_round",
                  "noise_sigma", "prior_mean", "prior_cov", "obs_noise_sigma",
                  "obs_noise_seed", "observation_layout")


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ValidationError("config", f"no such file: {path}")
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ValidationError("config", f"invalid JSON: {err}") from None
    if not isinstance(config, dict):
        raise ValidationError("config", "top-level JSON value must be an object")
    unknown = set(config) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS)
    if unknown:
        raise ValidationError("config", f"unknown keys: {sorted(unknown)}")
    missing = [key for key in _REQUIRED_KEYS if key not in config]
    if missing:
        raise ValidationError("config", f"missing keys: {missing}")
    return config


def config_to_spec(config: dict, dt: float, scheme_order: int) -> ProblemSpec:
    """Build and validate a spec for one (dt, order) cell of the config."""
    n, m = int(config["n"]), int(config["m"])
    for key, shape in (("a_true", (n, n)), ("b", (n, m)), ("q", (n, n)),
                       ("r", (m, m)), ("q_f", (n, n))):
        arr = np.asarray(config[key], dtype=float)
        if arr.shape != shape:
            raise ValidationError(key, f"expected shape {shape}, got {arr.shape}")
    x0 = np.asarray(config["x0"], dtype=float)
    if x0.shape != (n,):
        raise ValidationError("x0", f"expected shape ({n},), got {x0.shape}")
    spec = ProblemSpec(
        a_true=config["a_true"], b=config["b"], q=config["q"], r=config["r"],
        q_f=config["q_f"], horizon=config["horizon"], x0=config["x0"],
        dt=dt, scheme_order=scheme_order,
        steps_per_round=config.get("steps_per_round"),
        noise_sigma=config.get("noise_sigma"),
        prior_mean=config.get("prior_mean"),
        prior_cov=config.get("prior_cov"),
        obs_noise_sigma=config.get("obs_noise_sigma", 0.0),
        obs_noise_seed=config.get("obs_noise_seed", 0),
        observation_layout=config.get("observation_layout", "block-start"),
    )
    return validate_spec(spec)


def _scalar_dt(config: dict) -> float:
    if "dt" not in config or config["dt"] is None:
        raise ValidationError("dt", "the run command needs a scalar dt")
    return float(config["dt"])


def cmd_run(args) -> int:
    config = load_config(args.config)
    spec = config_to_spec(config, _scalar_dt(config),
                          int(config.get("scheme_order", 1)))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trajectory, records = run_online(spec)
    reference, reference_cost = run_reference(spec)
    online_cost = cost_of(trajectory, spec)
    final_a_error = a_error(records[-1].belief_after.mean_matrix(), spec.a_true)

    summary = report.build_summary(spec, online_cost, reference_cost,
                                   final_a_error, records)
    report.write_json(out_dir / "summary.json", summary)
    report.write_json(out_dir / "belief.json",
                      {"schema_version": report.SCHEMA_VERSION,
                       "rounds": report.belief_snapshots(records)})
    if args.format in ("csv", "both"):
        report.write_trajectory_csv(out_dir / "trajectories.csv", trajectory, reference)
    if args.format in ("json", "both"):
        report.write_json(out_dir / "trajectories.json",
                          report.trajectory_pair_dict(trajectory, reference))
    if args.plots:
        figures.plot_controls(out_dir / "controls.png", trajectory, reference)
        figures.plot_trajectory(out_dir / "trajectory.png", trajectory, reference)
    print(f"online cost {online_cost:.6g} | reference cost {reference_cost:.6g} "
          f"| final state-matrix error {final_a_error:.6g}")
    print(f"outputs written to {out_dir}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    dt_list = config.get("dt_list") or [_scalar_dt(config)]
    p_list = config.get("p_list") or [int(config.get("scheme_order", 1))]
    base_spec = config_to_spec(config, float(dt_list[0]), int(p_list[0]))
    sweep = run_sweep(base_spec, [float(d) for d in dt_list],
                      [int(p) for p in p_list], parallel=bool(args.parallel))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format in ("csv", "both"):
        report.write_sweep_csv(out_dir / "sweep.csv", sweep)
    if args.format in ("json", "both"):
        report.write_json(out_dir / "sweep.json",
                          report.sweep_to_dict(sweep, base_spec))
    if args.plots:
        figures.plot_sweep(out_dir / "sweep_errors.png", sweep)
    ok_cells = [c for c in sweep.cells if c.status == "ok"]
    for cell in sweep.cells:
        flag = "" if cell.status == "ok" else f"  [{cell.status}: {cell.message}]"
        print(f"dt={cell.dt:g} p={cell.scheme_order}: online={cell.online_cost:.6g} "
              f"reference={cell.reference_cost:.6g} a_error={cell.a_err:.6g}{flag}")
    print(f"outputs written to {out_dir}")
    if not ok_cells:
        print("all sweep cells failed", file=sys.stderr)
        return 3
    return 0


def cmd_selftest(_args) -> int:
    results = selftest.run_all()
    failed = False
    for name, passed, detail in results:
        print(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
        failed = failed or not passed
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="online-lqr",
        description="Finite-horizon LQR with online Bayesian identification "
                    "of the state matrix.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io_flags(p):
        p.add_argument("--config", required=True, help="path to a JSON run config")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--format", choices=("csv", "json", "both"), default="both",
                       help="table output format (default: both)")
        p.add_argument("--parallel", type=int, choices=(0, 1), default=0,
                       help="run independent sweep cells in parallel")
        p.add_argument("--plots", type=int, choices=(0, 1), default=1,
                       help="render figures alongside the tables (default: 1)")

    run_p = sub.add_parser("run", help="one learning run plus its baseline")
    add_io_flags(run_p)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="grid-refinement tables over dt and order")
    add_io_flags(sweep_p)
    sweep_p.set_defaults(func=cmd_sweep)

    selftest_p = sub.add_parser("selftest", help="analytic-oracle checks")
    selftest_p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        where = f" (round {err.round_index})" if err.round_index else ""
        print(f"numerical divergence{where}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
