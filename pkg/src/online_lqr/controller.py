"""The online control loop and its known-model baseline.

One pass over [0, T]: at each round start the current belief mean feeds a
backward Riccati solve on the remaining horizon; the resulting feedback is
applied (held constant over each stencil block) while the true plant evolves;
at the round end the observed slice is turned into derivative observations
and the belief is conditioned on them.  The controller sees the hidden state
matrix only through those observations.

`run_reference` executes the identical actuation pipeline with the true
state matrix, providing the baseline cost the learner is compared against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import (MatrixBelief, bayes_update, build_stencils,
                     extract_observations, make_prior)
from .plant import ZohPlant, rollout
from .problem import (DivergenceError, ProblemSpec, Trajectory, cost_of,
                      make_grid, validate_spec)
from .riccati import gain_at, solve_backward


@dataclass(frozen=True, eq=False)
class RoundRecord:
    """What one round used and learned.

    `model_mean` is the matrix the round's Riccati solve was based on (the
    belief mean before the update); `belief_after` is the posterior once the
    round's observations are absorbed.  `gains` holds the gain applied on
    each step of the round (repeated within a block).
    """

    index: int               # 1-based round number
    t_start: float
    model_mean: np.ndarray   # (n, n)
    gains: np.ndarray        # (L, m, n)
    states: np.ndarray       # (L+1, n) observed round slice
    controls: np.ndarray     # (L, m)
    belief_after: MatrixBelief


class _OnlineDriver:
    """Feedback policy that learns between rounds.

    Implements the rollout policy protocol; `finalize` must be called with
    the closing state so the last round's observations are absorbed.
    """

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.grid = make_grid(spec)
        self.stencils = build_stencils(spec.scheme_order)
        self.belief = make_prior(spec.n, spec.m, mean=spec.prior_mean,
                                 cov=spec.prior_cov, noise_sigma=spec.noise_sigma)
        self.records: list[RoundRecord] = []
        self._round_index = 0
        self._round_start = 0
        self._states: list[np.ndarray] = []
        self._controls: list[np.ndarray] = []
        self._gains: list[np.ndarray] = []
        self._solution = None
        self._model = None
        self._gain = None
        self._u = None

    def __call__(self, k: int, observed: np.ndarray) -> np.ndarray:
        if k % self.spec.steps_per_round == 0:
            if k > 0:
                self._close_round(observed)
            self._open_round(k)
        self._states.append(np.array(observed))
        if self.grid.is_block_start(k):
            self._gain = gain_at(self._solution, self.grid.times[k])
            self._u = -(self._gain @ observed)
        self._controls.append(self._u)
        self._gains.append(self._gain)
        return self._u

    def finalize(self, closing_state: np.ndarray) -> None:
        self._close_round(np.array(closing_state))

    def _open_round(self, k: int) -> None:
        self._round_index += 1
        self._round_start = k
        self._model = self.belief.mean_matrix()
        try:
            self._solution = solve_backward(self._model, self.spec, self.grid.times[k])
        except DivergenceError as err:
            raise DivergenceError(
                f"round {self._round_index}: {err}", time=err.time,
                round_index=self._round_index) from err

    def _close_round(self, closing_state: np.ndarray) -> None:
        states = np.array(self._states + [closing_state])
        controls = np.array(self._controls)
        batch = extract_observations(states, controls, self.spec, self.stencils)
        self.belief = bayes_update(self.belief, batch)
        self.records.append(RoundRecord(
            index=self._round_index,
            t_start=self.grid.times[self._round_start],
            model_mean=self._model,
            gains=np.array(self._gains),
            states=states,
            controls=controls,
            belief_after=self.belief,
        ))
        self._states = []
        self._controls = []
        self._gains = []


class _HeldGainPolicy:
    """Applies precomputed gains at block starts and holds them in between."""

    def __init__(self, spec: ProblemSpec, solution):
        self.grid = make_grid(spec)
        self.solution = solution
        self._u = None

    def __call__(self, k: int, observed: np.ndarray) -> np.ndarray:
        if self.grid.is_block_start(k):
            self._u = -(gain_at(self.solution, self.grid.times[k]) @ observed)
        return self._u


def run_online(spec: ProblemSpec, plant: ZohPlant | None = None
               ) -> tuple[Trajectory, list[RoundRecord]]:
    """Run the learning controller once over [0, T].

    Returns the trajectory of the true plant and one record per round.  The
    plant may be overridden (used by the tests to demonstrate that the
    controller's decisions depend on the hidden matrix only through the
    observations it generates).
    """
    spec = validate_spec(spec)
    driver = _OnlineDriver(spec)
    trajectory = rollout(spec, driver, plant=plant)
    driver.finalize(trajectory.states[-1])
    return trajectory, driver.records


def run_reference(spec: ProblemSpec, plant: ZohPlant | None = None
                  ) -> tuple[Trajectory, float]:
    """Known-model baseline: same actuation granularity, true state matrix.

    One backward Riccati solve over the whole horizon (with the model fixed,
    per-round re-solves would reproduce the same node values) feeding the
    same block-held feedback.  Returns the trajectory and its cost.
    """
    spec = validate_spec(spec)
    solution = solve_backward(spec.a_true, spec, 0.0)
    trajectory = rollout(spec, _HeldGainPolicy(spec, solution), plant=plant)
    return trajectory, cost_of(trajectory, spec)
