"""Gaussian belief over the unknown state matrix and its regression update.

The unknown matrix is modelled row-wise: each row is an independent Gaussian
vector, and because every row regresses on the same inputs with the same
noise scale, all rows share a single covariance matrix.  Derivative
observations are produced by finite-difference stencils applied within the
constant-control blocks of a round, and the belief is refreshed once per
round with the standard conjugate-Gaussian update

    precision' = precision + X X' / sigma^2
    mean_k'    = covariance' (X y_k / sigma^2 + precision mean_k)

computed through Cholesky factorizations of the precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .problem import ProblemSpec, validate_spec

STENCIL_ORDERS = (1, 2, 4)


@dataclass(frozen=True, eq=False)
class MatrixBelief:
    """Row-wise Gaussian over candidate state matrices.

    `row_means[k]` is the mean of row k; `covariance` is the shared row
    covariance; `noise_sigma` is the observation noise scale used in updates.
    """

    row_means: np.ndarray    # (n, n), row k = mean of row k
    covariance: np.ndarray   # (n, n), symmetric positive definite
    noise_sigma: float

    @property
    def n(self) -> int:
        return self.row_means.shape[0]

    def mean_matrix(self) -> np.ndarray:
        """Rows stacked into the point estimate of the unknown matrix."""
        return self.row_means

    def covariance_trace(self) -> float:
        return float(np.trace(self.covariance))


@dataclass(frozen=True, eq=False)
class RegressionBatch:
    """One round's worth of derivative observations.

    Column j of `regressors` is the state at an observation node; row k of
    `targets` holds the k-th component of the derivative observations, with
    the known control contribution already subtracted.
    """

    regressors: np.ndarray   # (n, c)
    targets: np.ndarray      # (n, c)

    @property
    def n_columns(self) -> int:
        return self.regressors.shape[1]


@dataclass(frozen=True, eq=False)
class StencilTable:
    """Finite-difference weights of one order on a block of uniform nodes.

    `weights[k]` holds c_0..c_p with x'(node k) ~ (1/dt) * sum_j c_j x(node j)
    over the p+1 nodes of one constant-control block.  Every row is exact on
    polynomials up to degree p.
    """

    order: int
    weights: np.ndarray      # (p, p+1)


def make_prior(n: int, m: int, mean=None, cov=None, noise_sigma: float = 1.0) -> MatrixBelief:
    """Default prior: zero row means and covariance n*m*I, unless overridden.

    `mean` may be a length-n vector (shared by all rows) or an (n, n) matrix
    of per-row means.
    """
    if n < 1 or m < 1:
        raise ValueError("state and control dimensions must be >= 1")
    if mean is None:
        row_means = np.zeros((n, n))
    else:
        mean = np.asarray(mean, dtype=float)
        if mean.shape == (n,):
            row_means = np.tile(mean, (n, 1))
        elif mean.shape == (n, n):
            row_means = mean.copy()
        else:
            raise ValueError(f"prior mean has shape {mean.shape}, expected ({n},) or ({n}, {n})")
    if cov is None:
        covariance = float(n * m) * np.eye(n)
    else:
        covariance = np.asarray(cov, dtype=float)
        if covariance.shape != (n, n):
            raise ValueError(f"prior covariance has shape {covariance.shape}, expected ({n}, {n})")
        covariance = 0.5 * (covariance + covariance.T)
        try:
            np.linalg.cholesky(covariance)
        except np.linalg.LinAlgError:
            raise ValueError("prior covariance is not positive definite") from None
    if noise_sigma <= 0:
        raise ValueError("noise_sigma must be positive")
    row_means.setflags(write=False)
    covariance.setflags(write=False)
    return MatrixBelief(row_means=row_means, covariance=covariance,
                        noise_sigma=float(noise_sigma))


def build_stencils(order: int) -> StencilTable:
    """Derivative stencils of the given order on p+1 uniformly spaced nodes.

    Row k evaluates the derivative at node k (k = 0..p-1).  The weights solve
    the Vandermonde moment system sum_j c_j (j-k)^d = d! [d == 1] for
    d = 0..p, which makes each row exact on polynomials of degree <= p.
    """
    if order not in STENCIL_ORDERS:
        raise ValueError(f"unsupported stencil order {order}, expected one of {STENCIL_ORDERS}")
    p = order
    weights = np.empty((p, p + 1))
    moments = np.zeros(p + 1)
    moments[1] = 1.0
    for k in range(p):
        offsets = np.arange(p + 1, dtype=float) - k
        vander = np.vander(offsets, p + 1, increasing=True).T   # vander[d, j] = (j-k)^d
        weights[k] = np.linalg.solve(vander, moments)
    weights.setflags(write=False)
    return StencilTable(order=p, weights=weights)


def extract_observations(states: np.ndarray, controls: np.ndarray,
                         spec: ProblemSpec,
                         stencils: StencilTable | None = None) -> RegressionBatch:
    """Turn one round's trajectory slice into regression columns.

    `states` holds the L+1 nodes of the round (the closing node is shared
    with the next round) and `controls` the L per-step controls, constant
    within each block of `scheme_order` steps.  Each complete block emits one
    column: the regressor is the state at the block start and the target is
    the stencil estimate of the derivative there minus the control term
    B u.  (With `observation_layout="all-offsets"` every non-terminal block
    node emits a column instead; the first-order case is identical either
    way.)  A trailing incomplete block emits nothing.
    """
    spec = validate_spec(spec)
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    p = spec.scheme_order
    if states.ndim != 2 or states.shape[1] != spec.n:
        raise ValueError(f"states must be (L+1, {spec.n}), got {states.shape}")
    if len(states) != len(controls) + 1:
        raise ValueError(f"slice too short or inconsistent: {len(states)} states "
                         f"vs {len(controls)} controls")
    if not (np.all(np.isfinite(states)) and np.all(np.isfinite(controls))):
        raise ValueError("non-finite trajectory slice")
    if stencils is None:
        stencils = build_stencils(p)
    elif stencils.order != p:
        raise ValueError(f"stencil order {stencils.order} does not match scheme order {p}")

    n_ctrl_steps = len(controls)
    all_offsets = spec.observation_layout == "all-offsets"
    regressors = []
    targets = []
    for start in range(0, n_ctrl_steps - p + 1, p):
        block_u = controls[start]
        if not np.array_equal(controls[start:start + p],
                              np.broadcast_to(block_u, (p, spec.m))):
            raise ValueError(f"control varies within the block starting at step {start}")
        block_states = states[start:start + p + 1]
        drive = spec.b @ block_u
        offsets = range(p) if all_offsets else (0,)
        for k in offsets:
            deriv = stencils.weights[k] @ block_states / spec.dt
            regressors.append(states[start + k])
            targets.append(deriv - drive)
    if regressors:
        x_mat = np.array(regressors).T
        y_mat = np.array(targets).T
    else:
        x_mat = np.empty((spec.n, 0))
        y_mat = np.empty((spec.n, 0))
    x_mat.setflags(write=False)
    y_mat.setflags(write=False)
    return RegressionBatch(regressors=x_mat, targets=y_mat)


def bayes_update(belief: MatrixBelief, batch: RegressionBatch) -> MatrixBelief:
    """Condition the belief on a batch of derivative observations.

    Returns a new belief; the input is untouched.  An empty batch returns the
    prior unchanged.  The posterior precision is assembled and factorized
    once (Cholesky); the covariance and all row means are obtained by solves
    against that factor, and the covariance is re-symmetrized.
    """
    if batch.n_columns == 0:
        return belief
    if belief.noise_sigma <= 0:
        raise ValueError("noise_sigma must be positive")
    x_mat, y_mat = batch.regressors, batch.targets
    if x_mat.shape[0] != belief.n:
        raise ValueError(f"batch dimension {x_mat.shape[0]} does not match belief "
                         f"dimension {belief.n}")
    if not (np.all(np.isfinite(x_mat)) and np.all(np.isfinite(y_mat))):
        raise ValueError("non-finite regression batch")

    inv_noise_var = 1.0 / belief.noise_sigma**2
    eye = np.eye(belief.n)
    precision = cho_solve(cho_factor(belief.covariance, lower=True), eye)
    precision = 0.5 * (precision + precision.T)
    posterior_precision = precision + inv_noise_var * (x_mat @ x_mat.T)
    posterior_precision = 0.5 * (posterior_precision + posterior_precision.T)
    factor = cho_factor(posterior_precision, lower=True)
    covariance = cho_solve(factor, eye)
    covariance = 0.5 * (covariance + covariance.T)
    rhs = inv_noise_var * (x_mat @ y_mat.T) + precision @ belief.row_means.T
    row_means = cho_solve(factor, rhs).T
    row_means.setflags(write=False)
    covariance.setflags(write=False)
    return MatrixBelief(row_means=row_means, covariance=covariance,
                        noise_sigma=belief.noise_sigma)
