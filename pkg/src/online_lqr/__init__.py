"""Online finite-horizon LQR with Bayesian identification of the state matrix.

The library simulates a linear plant whose state matrix is hidden from the
controller, learns that matrix on the fly from finite-difference derivative
observations via Gaussian linear regression, and steers the plant with
round-wise Riccati feedback computed from the current belief mean, all in a
single trajectory.
"""
from .belief import (MatrixBelief, RegressionBatch, StencilTable, bayes_update,
                     build_stencils, extract_observations, make_prior)
from .controller import RoundRecord, run_online, run_reference
from .harness import SweepCell, SweepResult, a_error, convergence_order, run_sweep
from .plant import PlantState, ZohPlant, discretize, rollout, step
from .problem import (DivergenceError, ProblemSpec, TimeGrid, Trajectory,
                      ValidationError, cost_of, make_grid, validate_spec)
from .riccati import FeedbackGain, RiccatiSolution, feedback_gains, gain_at, solve_backward

__version__ = "0.1.0"

__all__ = [
    "DivergenceError", "FeedbackGain", "MatrixBelief", "PlantState",
    "ProblemSpec", "RegressionBatch", "RiccatiSolution", "RoundRecord",
    "StencilTable", "SweepCell", "SweepResult", "TimeGrid", "Trajectory",
    "ValidationError", "ZohPlant", "a_error", "bayes_update", "build_stencils",
    "convergence_order", "cost_of", "discretize", "extract_observations",
    "feedback_gains", "gain_at", "make_grid", "make_prior", "rollout",
    "run_online", "run_reference", "run_sweep", "solve_backward", "step",
]
