"""Analytic-oracle checks runnable from the CLI without the test suite.

Each check compares a pipeline component against a closed-form result or an
independently computed quantity and returns (name, passed, detail).
"""
from __future__ import annotations

import math

import numpy as np

from .belief import bayes_update, build_stencils, make_prior, RegressionBatch
from .plant import PlantState, step
from .problem import ProblemSpec, validate_spec
from .riccati import solve_backward


def check_riccati_tanh():
    """Scalar problem with a = 0, b = q = r = 1, qf = 0 has P(t) = tanh(T-t)."""
    spec = validate_spec(ProblemSpec(
        a_true=[[0.0]], b=[[1.0]], q=[[1.0]], r=[[1.0]], q_f=[[0.0]],
        horizon=1.0, x0=[0.0], dt=0.1))
    sol = solve_backward(np.zeros((1, 1)), spec, 0.0)
    err = abs(sol.p_matrices[0][0, 0] - math.tanh(1.0))
    return "riccati-tanh", err <= 1e-8, f"|P(0) - tanh(1)| = {err:.3e}"


def check_plant_rotation():
    """Planar rotation from (0, 1) reaches (1, 0) at a quarter period."""
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    b = np.zeros((2, 1))
    state = PlantState(t=0.0, x=np.array([0.0, 1.0]))
    dt = math.pi / 40
    for _ in range(20):
        state = step(state, np.zeros(1), dt, a, b)
    err = float(np.max(np.abs(state.x - np.array([1.0, 0.0]))))
    return "plant-rotation", err <= 1e-10, f"|x(pi/2) - (1,0)| = {err:.3e}"


def check_plant_exponential():
    """Scalar a = b = u = 1 from x0 = 0 gives x(t) = e^t - 1."""
    state = PlantState(t=0.0, x=np.zeros(1))
    for _ in range(10):
        state = step(state, np.ones(1), 0.1, np.ones((1, 1)), np.ones((1, 1)))
    err = abs(state.x[0] - (math.e - 1.0))
    return "plant-exponential", err <= 1e-10, f"|x(1) - (e-1)| = {err:.3e}"


def check_ridge_equivalence():
    """With zero prior mean the posterior mean solves the ridge system."""
    rng = np.random.default_rng(7)
    n, cols, sigma = 3, 8, 0.7
    x_mat = rng.normal(size=(n, cols))
    y_mat = rng.normal(size=(n, cols))
    cov = rng.normal(size=(n, n))
    cov = cov @ cov.T + n * np.eye(n)
    prior = make_prior(n, 2, mean=np.zeros(n), cov=cov, noise_sigma=sigma)
    posterior = bayes_update(prior, RegressionBatch(regressors=x_mat, targets=y_mat))
    lhs = x_mat @ x_mat.T + sigma**2 * np.linalg.inv(cov)
    direct = np.linalg.solve(lhs, x_mat @ y_mat.T).T
    err = float(np.max(np.abs(posterior.mean_matrix() - direct)))
    return "ridge-equivalence", err <= 1e-10, f"max deviation = {err:.3e}"


def check_stencil_exactness():
    """Each stencil reproduces d/dt t^d exactly for d up to its order."""
    worst = 0.0
    for order in (1, 2, 4):
        table = build_stencils(order)
        for dt in (0.1, 0.01):
            nodes = 0.3 + dt * np.arange(order + 1)
            for degree in range(order + 1):
                samples = nodes**degree
                for k in range(order):
                    estimate = table.weights[k] @ samples / dt
                    exact = degree * nodes[k]**(degree - 1) if degree > 0 else 0.0
                    worst = max(worst, abs(estimate - exact) * dt)
    return "stencil-exactness", worst <= 1e-10, f"worst scaled residual = {worst:.3e}"


ALL_CHECKS = (
    check_riccati_tanh,
    check_plant_rotation,
    check_plant_exponential,
    check_ridge_equivalence,
    check_stencil_exactness,
)


def run_all():
    return [check() for check in ALL_CHECKS]
