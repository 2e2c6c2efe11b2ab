"""Exact simulation of the true linear plant under zero-order-hold controls.

The plant is stepped with the matrix exponential of the augmented system,
so the only error in a step is roundoff; derivative-estimation error in the
regression therefore comes from the finite-difference stencils alone, never
from the integrator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .problem import DivergenceError, ProblemSpec, Trajectory, make_grid, validate_spec

#: states with any entry beyond this magnitude are reported as divergence
BLOWUP_LIMIT = 1e12

Policy = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PlantState:
    t: float
    x: np.ndarray


def discretize(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-step transition (Ad, Bd) for dx/dt = A x + B u with u held.

    x(t+dt) = Ad x(t) + Bd u, read off the exponential of the augmented
    block matrix [[A, B], [0, 0]].
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = b.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = a
    aug[:n, n:] = b
    exp_aug = expm(aug * dt)
    return exp_aug[:n, :n], exp_aug[:n, n:]


def step(state: PlantState, u: np.ndarray, dt: float,
         a: np.ndarray, b: np.ndarray) -> PlantState:
    """Advance the plant one step of length dt under the constant control u.

    Exponentiates the (n+1)-square augmented matrix [[A, Bu], [0, 0]], so the
    returned state is the exact flow to roundoff.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1)
    n = a.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = a
    aug[:n, n] = b @ u
    exp_aug = expm(aug * dt)
    x_next = exp_aug[:n, :n] @ state.x + exp_aug[:n, n]
    t_next = state.t + dt
    _check_finite(x_next, t_next)
    return PlantState(t=t_next, x=x_next)


class ZohPlant:
    """Precomputed exact stepper for one (A, B, dt) triple."""

    def __init__(self, a: np.ndarray, b: np.ndarray, dt: float):
        self.ad, self.bd = discretize(a, b, dt)
        self.dt = dt

    def advance(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.ad @ x + self.bd @ u


def _check_finite(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_LIMIT:
        raise DivergenceError(f"plant state diverged at t = {t:.6g}", time=t)


def rollout(spec: ProblemSpec, policy: Policy, plant: ZohPlant | None = None) -> Trajectory:
    """Run the plant over the full grid under a feedback policy.

    The policy is queried at every node k = 0..N-1 with the observed state
    and must return the control for [t_k, t_{k+1}); it may change the control
    only at block boundaries (every `scheme_order` steps), which is enforced.
    Observed states equal the true states unless `obs_noise_sigma` is set, in
    which case i.i.d. Gaussian noise (seeded, reproducible) is added to what
    the policy sees; the returned trajectory always holds the true states.
    """
    spec = validate_spec(spec)
    grid = make_grid(spec)
    if plant is None:
        plant = ZohPlant(spec.a_true, spec.b, spec.dt)

    rng = None
    if spec.obs_noise_sigma > 0:
        rng = np.random.default_rng(spec.obs_noise_seed)

    n, m = spec.n, spec.m
    states = np.empty((grid.n_steps + 1, n))
    controls = np.empty((grid.n_steps, m))
    x = spec.x0.astype(float)
    states[0] = x
    u_block = None
    for k in range(grid.n_steps):
        observed = x if rng is None else x + rng.normal(0.0, spec.obs_noise_sigma, size=n)
        u = np.asarray(policy(k, observed), dtype=float).reshape(-1)
        if u.shape != (m,):
            raise ValueError(f"policy returned control of shape {u.shape}, expected ({m},)")
        if grid.is_block_start(k):
            u_block = u
        elif not np.array_equal(u, u_block):
            raise ValueError(f"policy changed the control at node {k}, "
                             f"which is not a block boundary")
        controls[k] = u
        x = plant.advance(x, u)
        _check_finite(x, grid.times[k + 1])
        states[k + 1] = x
    return Trajectory(times=grid.times, states=states, controls=controls)
