"""Problem data, discretization grid, trajectories, and the cost evaluator.

Everything downstream (plant simulation, Riccati solves, regression, the
online loop) works against the `ProblemSpec` defined here.  A spec is
validated once with `validate_spec`, which fills in defaulted fields
(steps per round, regression noise scale, prior) and checks the structural
invariants; the returned spec is immutable and safe to share.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

SCHEME_ORDERS = (1, 2, 4)
OBSERVATION_LAYOUTS = ("block-start", "all-offsets")

#: noise scale applied when `noise_sigma` is left unset: sigma = sqrt(10) * dt**p
DEFAULT_SIGMA_FACTOR = math.sqrt(10.0)

_SYM_TOL = 1e-12
_GRID_TOL = 1e-9


class ValidationError(ValueError):
    """A problem spec or config violates a structural requirement.

    `field_name` names the offending field so CLI errors can point at it.
    """

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


class DivergenceError(RuntimeError):
    """A simulated quantity left the trusted numerical range.

    Carries the time of blow-up and, when raised inside the online loop,
    the 1-based round index.
    """

    def __init__(self, message: str, *, time: float | None = None,
                 round_index: int | None = None):
        self.time = time
        self.round_index = round_index
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A finite-horizon LQR instance plus discretization and learner settings.

    `a_true` is the hidden state matrix: it drives the simulated plant and
    the error reporting, but the online controller only ever sees it through
    the observed states.
    """

    a_true: np.ndarray          # (n, n) hidden state matrix
    b: np.ndarray               # (n, m) input matrix
    q: np.ndarray               # (n, n) running state cost, symmetric PSD
    r: np.ndarray               # (m, m) running control cost, symmetric PD
    q_f: np.ndarray             # (n, n) terminal state cost, symmetric PSD
    horizon: float              # T > 0
    x0: np.ndarray              # (n,) initial state
    dt: float                   # grid step > 0; horizon/dt must be integral
    scheme_order: int = 1       # derivative-stencil order p in {1, 2, 4}
    steps_per_round: int | None = None   # S; defaults to 2p
    noise_sigma: float | None = None     # regression noise scale; defaults to sqrt(10)*dt**p
    prior_mean: np.ndarray | None = None  # (n,) shared row mean or (n, n) per-row means
    prior_cov: np.ndarray | None = None   # (n, n) shared row covariance; defaults to n*m*I
    obs_noise_sigma: float = 0.0      # additive noise on observed states (off by default)
    obs_noise_seed: int = 0
    observation_layout: str = "block-start"   # or "all-offsets"; recorded in run metadata

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_rounds(self) -> int:
        return -(-self.n_steps // self.steps_per_round)   # ceil division

    @property
    def has_partial_final_round(self) -> bool:
        return self.n_steps % self.steps_per_round != 0


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*dt with round and block bookkeeping.

    A round spans `steps_per_round` steps (the final round may be shorter);
    a block spans `block_len` steps and is the span over which the control
    is held constant.  Because the block length divides the round length,
    block starts are exactly the nodes with k % block_len == 0.
    """

    dt: float
    n_steps: int
    steps_per_round: int
    block_len: int
    times: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        times = np.arange(self.n_steps + 1) * self.dt
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def round_starts(self) -> np.ndarray:
        return np.arange(0, self.n_steps, self.steps_per_round)

    @property
    def block_starts(self) -> np.ndarray:
        return np.arange(0, self.n_steps, self.block_len)

    def is_block_start(self, k: int) -> bool:
        return k % self.block_len == 0

    def round_bounds(self, i: int) -> tuple[int, int]:
        """Node index range [start, stop] of 0-based round i (stop inclusive)."""
        start = i * self.steps_per_round
        stop = min(start + self.steps_per_round, self.n_steps)
        return start, stop


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on the grid nodes and the control held on each step.

    `controls[k]` is applied on [t_k, t_{k+1}); states has one more entry
    than controls.
    """

    times: np.ndarray    # (N+1,)
    states: np.ndarray   # (N+1, n)
    controls: np.ndarray  # (N, m)

    def __post_init__(self):
        if len(self.states) != len(self.times) or len(self.controls) != len(self.times) - 1:
            raise ValueError(
                f"trajectory length mismatch: {len(self.times)} times, "
                f"{len(self.states)} states, {len(self.controls)} controls")


def make_grid(spec: ProblemSpec) -> TimeGrid:
    return TimeGrid(dt=spec.dt, n_steps=spec.n_steps,
                    steps_per_round=spec.steps_per_round,
                    block_len=spec.scheme_order)


def _as_matrix(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ValidationError(name, f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(name, "contains non-finite entries")
    return arr


def _check_symmetric(mat: np.ndarray, name: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > _SYM_TOL * scale:
        raise ValidationError(name, "not symmetric")
    return 0.5 * (mat + mat.T)


def _check_psd(mat: np.ndarray, name: str) -> None:
    eigs = np.linalg.eigvalsh(mat)
    scale = max(1.0, float(np.max(np.abs(mat))))
    if eigs.min() < -_SYM_TOL * scale:
        raise ValidationError(name, "not positive semi-definite")


def _check_pd(mat: np.ndarray, name: str) -> None:
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ValidationError(name, "not positive definite") from None


def validate_spec(spec: ProblemSpec) -> ProblemSpec:
    """Check all structural invariants and resolve defaulted fields.

    Returns a new spec with every array coerced to a read-only float64
    ndarray and with `steps_per_round`, `noise_sigma`, `prior_mean` and
    `prior_cov` filled in.  Idempotent.

    Raises `ValidationError` naming the offending field on any violation.
    """
    x0 = np.asarray(spec.x0, dtype=float).reshape(-1)
    n = x0.shape[0]
    if n < 1:
        raise ValidationError("x0", "empty initial state")
    if not np.all(np.isfinite(x0)):
        raise ValidationError("x0", "contains non-finite entries")

    b = np.asarray(spec.b, dtype=float)
    if b.ndim != 2 or b.shape[0] != n:
        raise ValidationError("b", f"expected shape ({n}, m), got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValidationError("b", "contains non-finite entries")
    m = b.shape[1]

    a_true = _as_matrix(spec.a_true, (n, n), "a_true")
    q = _check_symmetric(_as_matrix(spec.q, (n, n), "q"), "q")
    q_f = _check_symmetric(_as_matrix(spec.q_f, (n, n), "q_f"), "q_f")
    r = _check_symmetric(_as_matrix(spec.r, (m, m), "r"), "r")
    _check_psd(q, "q")
    _check_psd(q_f, "q_f")
    _check_pd(r, "r")

    horizon = float(spec.horizon)
    if horizon <= 0:
        raise ValidationError("horizon", "must be positive")
    dt = float(spec.dt)
    if dt <= 0:
        raise ValidationError("dt", "must be positive")
    ratio = horizon / dt
    n_steps = int(round(ratio))
    if n_steps < 1 or abs(ratio - n_steps) > _GRID_TOL:
        raise ValidationError("dt", f"horizon/dt = {ratio!r} is not an integer number of steps")

    p = int(spec.scheme_order)
    if p not in SCHEME_ORDERS:
        raise ValidationError("scheme_order", f"must be one of {SCHEME_ORDERS}, got {p}")

    s = 2 * p if spec.steps_per_round is None else int(spec.steps_per_round)
    if s < 1:
        raise ValidationError("steps_per_round", "must be >= 1")
    if s % p != 0:
        raise ValidationError("steps_per_round",
                              f"not a multiple of scheme_order (S={s}, p={p})")
    # N need not be a multiple of S: a trailing short round is allowed and
    # contributes observations only from its complete blocks.

    sigma = DEFAULT_SIGMA_FACTOR * dt**p if spec.noise_sigma is None else float(spec.noise_sigma)
    if sigma <= 0:
        raise ValidationError("noise_sigma", "must be positive")

    if spec.prior_mean is None:
        prior_mean = np.zeros(n)
    else:
        prior_mean = np.asarray(spec.prior_mean, dtype=float)
        if prior_mean.shape not in ((n,), (n, n)):
            raise ValidationError("prior_mean",
                                  f"expected shape ({n},) or ({n}, {n}), got {prior_mean.shape}")
        if not np.all(np.isfinite(prior_mean)):
            raise ValidationError("prior_mean", "contains non-finite entries")

    if spec.prior_cov is None:
        prior_cov = float(n * m) * np.eye(n)
    else:
        prior_cov = _check_symmetric(_as_matrix(spec.prior_cov, (n, n), "prior_cov"), "prior_cov")
        _check_pd(prior_cov, "prior_cov")

    obs_sigma = float(spec.obs_noise_sigma)
    if obs_sigma < 0:
        raise ValidationError("obs_noise_sigma", "must be >= 0")

    layout = spec.observation_layout
    if layout not in OBSERVATION_LAYOUTS:
        raise ValidationError("observation_layout",
                              f"must be one of {OBSERVATION_LAYOUTS}, got {layout!r}")

    for arr in (a_true, b, q, r, q_f, x0, prior_mean, prior_cov):
        arr.setflags(write=False)

    return ProblemSpec(
        a_true=a_true, b=b, q=q, r=r, q_f=q_f,
        horizon=horizon, x0=x0, dt=dt,
        scheme_order=p, steps_per_round=s, noise_sigma=sigma,
        prior_mean=prior_mean, prior_cov=prior_cov,
        obs_noise_sigma=obs_sigma, obs_noise_seed=int(spec.obs_noise_seed),
        observation_layout=layout,
    )


def _segment_gram(a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray,
                  dt: float) -> np.ndarray:
    """Gram matrix H with z' H z = integral over one step of x'Qx + u'Ru.

    z = (x_k, u_k) and x(t) follows dx/dt = A x + B u with u held constant.
    Uses the block-exponential identity for integrals of quadratic forms
    along linear flows, so the segment cost is exact to roundoff.
    """
    n, m = b.shape
    nz = n + m
    drift = np.zeros((nz, nz))
    drift[:n, :n] = a
    drift[:n, n:] = b
    weight = np.zeros((nz, nz))
    weight[:n, :n] = q
    weight[n:, n:] = r
    big = np.zeros((2 * nz, 2 * nz))
    big[:nz, :nz] = -drift.T
    big[:nz, nz:] = weight
    big[nz:, nz:] = drift
    exp_big = expm(big * dt)
    gram = exp_big[nz:, nz:].T @ exp_big[:nz, nz:]
    return 0.5 * (gram + gram.T)


def cost_of(trajectory: Trajectory, spec: ProblemSpec) -> float:
    """Cost of a piecewise-constant-control trajectory of the true plant.

    Returns the integral of x'Qx + u'Ru over [0, T] plus the terminal term
    x(T)'Qf x(T).  Within each step the state is reconstructed exactly from
    the node value under the held control, so the integral carries no
    quadrature error; the reported value matches the scale used by the
    bundled experiment tables.
    """
    spec = validate_spec(spec)
    n_steps = spec.n_steps
    if len(trajectory.states) != n_steps + 1:
        raise ValueError(
            f"trajectory has {len(trajectory.states)} states, grid expects {n_steps + 1}")
    gram = _segment_gram(spec.a_true, spec.b, spec.q, spec.r, spec.dt)
    z = np.hstack([trajectory.states[:-1], trajectory.controls])
    running = float(np.einsum("ij,jk,ik->", z, gram, z))
    x_end = trajectory.states[-1]
    return running + float(x_end @ spec.q_f @ x_end)
