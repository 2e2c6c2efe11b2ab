"""Backward matrix Riccati integration and time-varying feedback gains.

The quadratic matrix ODE

    -dP/dt = A'P + P A - P B R^{-1} B' P + Q,    P(T) = Qf

is integrated backward with classical fourth-order Runge-Kutta at a fixed
substep of dt/10, re-symmetrizing after every substep.  The solution is
sampled at the grid nodes, which is exactly where the feedback gains
K(t) = R^{-1} B' P(t) are needed, so no interpolation ever happens.

The inner loop is compiled with numba when available (the per-round
re-solves of the online loop make it the hot spot); a vectorized numpy
fallback with identical semantics is kept both as a slow-path and as a
cross-check in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve as linalg_solve

from .problem import DivergenceError, ProblemSpec, validate_spec

#: ||P||_max beyond which the backward integration is reported as blow-up
BLOWUP_LIMIT = 1e12

#: RK4 substeps per grid interval
SUBSTEPS_PER_INTERVAL = 10

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:   # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """P(t) sampled at the grid nodes of [t_start, T], newest node last.

    `p_matrices[i]` is P(t_start + i*dt); the final entry equals Qf exactly.
    `rinv_bt` caches R^{-1} B' so gains are a single matmul.
    """

    t_start: float
    dt: float
    times: np.ndarray        # (K+1,)
    p_matrices: np.ndarray   # (K+1, n, n)
    rinv_bt: np.ndarray      # (m, n)


@dataclass(frozen=True, eq=False)
class FeedbackGain:
    """Gains K(t) = R^{-1} B' P(t) aligned with the solution sample times."""

    times: np.ndarray        # (K+1,)
    k_matrices: np.ndarray   # (K+1, m, n)


@njit(cache=True)
def _rk4_backward_compiled(a, g, q, qf, h, n_nodes, substeps, blowup):
    """Backward RK4 sweep storing P at every `substeps`-th substep.

    Returns (out, escape_index): escape_index is the substep count at which
    ||P||_max first exceeded `blowup`, or -1 if it never did.
    """
    n = a.shape[0]
    out = np.empty((n_nodes, n, n))
    p = qf.copy()
    out[n_nodes - 1] = p
    stage = np.empty((4, n, n))
    work = np.empty((n, n))
    p_try = np.empty((n, n))
    count = 0
    for node in range(n_nodes - 2, -1, -1):
        for _ in range(substeps):
            for s in range(4):
                if s == 0:
                    p_try[:] = p
                elif s == 1:
                    p_try[:] = p + 0.5 * h * stage[0]
                elif s == 2:
                    p_try[:] = p + 0.5 * h * stage[1]
                else:
                    p_try[:] = p + h * stage[2]
                # work = P G
                for i in range(n):
                    for j in range(n):
                        acc = 0.0
                        for l in range(n):
                            acc += p_try[i, l] * g[l, j]
                        work[i, j] = acc
                # stage = A'P + P A - (P G) P + Q, the backward-time derivative
                for i in range(n):
                    for j in range(n):
                        acc = q[i, j]
                        for l in range(n):
                            acc += (a[l, i] * p_try[l, j] + p_try[i, l] * a[l, j]
                                    - work[i, l] * p_try[l, j])
                        stage[s, i, j] = acc
            biggest = 0.0
            for i in range(n):
                for j in range(n):
                    p[i, j] += (h / 6.0) * (stage[0, i, j] + 2.0 * stage[1, i, j]
                                            + 2.0 * stage[2, i, j] + stage[3, i, j])
                    if abs(p[i, j]) > biggest:
                        biggest = abs(p[i, j])
            for i in range(n):
                for j in range(i + 1, n):
                    sym = 0.5 * (p[i, j] + p[j, i])
                    p[i, j] = sym
                    p[j, i] = sym
            count += 1
            if biggest > blowup:
                return out, count
        out[node] = p
    return out, -1


def _rk4_backward_numpy(a, g, q, qf, h, n_nodes, substeps, blowup):
    """Reference numpy implementation of the same backward sweep."""
    at = a.T

    def deriv(p):
        return at @ p + p @ a - p @ g @ p + q

    out = np.empty((n_nodes,) + qf.shape)
    p = qf.copy()
    out[n_nodes - 1] = p
    count = 0
    for node in range(n_nodes - 2, -1, -1):
        for _ in range(substeps):
            k1 = deriv(p)
            k2 = deriv(p + 0.5 * h * k1)
            k3 = deriv(p + 0.5 * h * k2)
            k4 = deriv(p + h * k3)
            p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            p = 0.5 * (p + p.T)
            count += 1
            if np.max(np.abs(p)) > blowup:
                return out, count
        out[node] = p
    return out, -1


USE_COMPILED = HAVE_NUMBA


def solve_backward(a_model: np.ndarray, spec: ProblemSpec, t_start: float,
                   substeps_per_interval: int = SUBSTEPS_PER_INTERVAL) -> RiccatiSolution:
    """Solve the backward Riccati equation for a model matrix on [t_start, T].

    `a_model` is whatever state matrix the caller currently believes in; the
    remaining problem data (B, Q, R, Qf, grid) come from the spec.  `t_start`
    must be a grid node strictly before the horizon.

    Raises `DivergenceError` with the blow-up time if ||P|| exceeds 1e12
    (finite-escape guard: existence is not assumed for arbitrary models).
    """
    spec = validate_spec(spec)
    n = spec.n
    a_model = np.ascontiguousarray(np.asarray(a_model, dtype=float))
    if a_model.shape != (n, n):
        raise ValueError(f"a_model has shape {a_model.shape}, expected ({n}, {n})")

    idx = int(round(t_start / spec.dt))
    if abs(t_start - idx * spec.dt) > 1e-9 or not 0 <= idx < spec.n_steps:
        raise ValueError(f"t_start = {t_start!r} is not a grid node before the horizon")

    rinv_bt = linalg_solve(spec.r, spec.b.T, assume_a="pos")
    gain_mat = spec.b @ rinv_bt
    gain_mat = np.ascontiguousarray(0.5 * (gain_mat + gain_mat.T))

    n_nodes = spec.n_steps - idx + 1
    h = spec.dt / substeps_per_interval
    kernel = _rk4_backward_compiled if USE_COMPILED else _rk4_backward_numpy
    p_matrices, escape = kernel(
        a_model, gain_mat, np.ascontiguousarray(spec.q),
        np.ascontiguousarray(spec.q_f), h, n_nodes,
        substeps_per_interval, BLOWUP_LIMIT)
    if escape >= 0:
        t_escape = spec.horizon - escape * h
        raise DivergenceError(
            f"Riccati solution blew up integrating backward through t = {t_escape:.6g}",
            time=t_escape)

    times = t_start + spec.dt * np.arange(n_nodes)
    for arr in (times, p_matrices, rinv_bt):
        arr.setflags(write=False)
    return RiccatiSolution(t_start=float(t_start), dt=spec.dt, times=times,
                           p_matrices=p_matrices, rinv_bt=rinv_bt)


def _node_index(sol: RiccatiSolution, t: float) -> int:
    idx = int(round((t - sol.t_start) / sol.dt))
    if abs(sol.t_start + idx * sol.dt - t) > 1e-9 or not 0 <= idx < len(sol.times):
        raise ValueError(f"t = {t!r} is not a sample node of this solution")
    return idx


def gain_at(sol: RiccatiSolution, t: float) -> np.ndarray:
    """Feedback gain K(t) = R^{-1} B' P(t) at a sample node."""
    return sol.rinv_bt @ sol.p_matrices[_node_index(sol, t)]


def feedback_gains(sol: RiccatiSolution) -> FeedbackGain:
    """Gains at every sample node of the solution."""
    k = np.einsum("ij,kjl->kil", sol.rinv_bt, sol.p_matrices)
    k.setflags(write=False)
    return FeedbackGain(times=sol.times, k_matrices=k)
