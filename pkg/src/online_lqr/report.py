"""Delimited and JSON output for runs and sweeps.

CSV numbers are written with 17 significant digits so files round-trip
float64 exactly; NaN/absent-order cells are left empty.  JSON output is
sorted-key, indented, and free of NaN so files are diffable and byte-stable
across identical runs.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .controller import RoundRecord
from .harness import SweepResult
from .problem import ProblemSpec, Trajectory

SCHEMA_VERSION = "1"


def fmt_float(value: float) -> str:
    return format(float(value), ".17g")


def sanitize(obj):
    """Recursively convert numpy containers/scalars and drop NaN for JSON."""
    if isinstance(obj, dict):
        return {key: sanitize(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return None if not math.isfinite(value) else value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path = Path(path)
    path.write_text(json.dumps(sanitize(obj), indent=2, sort_keys=True,
                               allow_nan=False) + "\n")


def trajectory_rows(trajectory: Trajectory, side: str) -> list[list[str]]:
    """Rows t, x_1..x_n, u_1..u_m, side; the terminal row repeats the last
    held control so step plots close cleanly."""
    controls = np.vstack([trajectory.controls, trajectory.controls[-1]])
    rows = []
    for t, x, u in zip(trajectory.times, trajectory.states, controls):
        rows.append([fmt_float(t), *map(fmt_float, x), *map(fmt_float, u), side])
    return rows


def write_trajectory_csv(path: Path, online: Trajectory, reference: Trajectory) -> None:
    n = online.states.shape[1]
    m = online.controls.shape[1]
    header = ["t", *[f"x_{i+1}" for i in range(n)], *[f"u_{j+1}" for j in range(m)], "side"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(trajectory_rows(online, "online"))
        writer.writerows(trajectory_rows(reference, "reference"))


def trajectory_pair_dict(online: Trajectory, reference: Trajectory) -> dict:
    def one(traj: Trajectory) -> dict:
        return {"times": traj.times, "states": traj.states, "controls": traj.controls}
    return {"online": one(online), "reference": one(reference)}


def belief_snapshots(records: list[RoundRecord]) -> list[dict]:
    snaps = []
    for record in records:
        belief = record.belief_after
        snaps.append({
            "round": record.index,
            "t_start": record.t_start,
            "model_mean": record.model_mean,
            "posterior_mean": belief.mean_matrix(),
            "posterior_covariance": belief.covariance,
            "covariance_trace": belief.covariance_trace(),
        })
    return snaps


def resolved_config(spec: ProblemSpec) -> dict:
    """Validated spec rendered back into the run-config schema."""
    return {
        "n": spec.n,
        "m": spec.m,
        "a_true": spec.a_true,
        "b": spec.b,
        "q": spec.q,
        "r": spec.r,
        "q_f": spec.q_f,
        "horizon": spec.horizon,
        "x0": spec.x0,
        "dt": spec.dt,
        "scheme_order": spec.scheme_order,
        "steps_per_round": spec.steps_per_round,
        "noise_sigma": spec.noise_sigma,
        "prior_mean": spec.prior_mean,
        "prior_cov": spec.prior_cov,
        "obs_noise_sigma": spec.obs_noise_sigma,
        "obs_noise_seed": spec.obs_noise_seed,
        "observation_layout": spec.observation_layout,
    }


def run_metadata(spec: ProblemSpec) -> dict:
    return {
        "n_steps": spec.n_steps,
        "n_rounds": spec.n_rounds,
        "partial_final_round": spec.has_partial_final_round,
        "actuation": f"control held constant per {spec.scheme_order}-step block",
        "observation_layout": spec.observation_layout,
    }


def build_summary(spec: ProblemSpec, online_cost: float, reference_cost: float,
                  final_a_error: float, records: list[RoundRecord]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": resolved_config(spec),
        "online_cost": online_cost,
        "reference_cost": reference_cost,
        "a_error_final": final_a_error,
        "covariance_trace_per_round": [r.belief_after.covariance_trace() for r in records],
        "metadata": run_metadata(spec),
    }


_SWEEP_COLUMNS = ["dt", "p", "steps_per_round", "sigma", "online_cost",
                  "reference_cost", "cost_error", "cost_order", "a_error",
                  "a_order", "status", "message"]


def write_sweep_csv(path: Path, sweep: SweepResult) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_SWEEP_COLUMNS)
        for cell in sweep.cells:
            numbers = [cell.online_cost, cell.reference_cost, cell.cost_error,
                       cell.cost_order, cell.a_err, cell.a_order]
            writer.writerow([
                fmt_float(cell.dt), cell.scheme_order, cell.steps_per_round,
                fmt_float(cell.sigma),
                *["" if not math.isfinite(v) else fmt_float(v) for v in numbers],
                cell.status, cell.message,
            ])


def sweep_to_dict(sweep: SweepResult, spec: ProblemSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": resolved_config(spec),
        "c_star": {str(p): value for p, value in sweep.c_star.items()},
        "cells": [{
            "dt": cell.dt,
            "p": cell.scheme_order,
            "steps_per_round": cell.steps_per_round,
            "sigma": cell.sigma,
            "online_cost": cell.online_cost,
            "reference_cost": cell.reference_cost,
            "cost_error": cell.cost_error,
            "cost_order": cell.cost_order,
            "a_error": cell.a_err,
            "a_order": cell.a_order,
            "status": cell.status,
            "message": cell.message,
        } for cell in sweep.cells],
    }
