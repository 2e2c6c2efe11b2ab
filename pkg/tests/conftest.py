from pathlib import Path

import numpy as np
import pytest

from online_lqr import ProblemSpec, solve_backward, validate_spec

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

TEST1_A = np.array([[0.0, 1.0], [-1.0, 0.0]])
TEST2_A = np.array([
    [-0.0215, -0.7776, -0.1922, 0.9123],
    [-0.3246, 0.5605, -0.8071, 0.1504],
    [0.8001, -0.2205, -0.7360, -0.8804],
    [-0.2615, -0.5166, 0.8841, -0.5304],
])
TEST2_B = np.array([
    [-0.2937, -0.6620, -0.0982],
    [0.6424, 0.2982, 0.0940],
    [-0.9692, 0.4634, -0.4074],
    [-0.9140, 0.2955, 0.4894],
])


def make_test1_spec(dt=0.1, scheme_order=1, **overrides) -> ProblemSpec:
    kwargs = dict(
        a_true=TEST1_A, b=[[0.0], [1.0]], q=np.eye(2), r=[[0.1]],
        q_f=np.zeros((2, 2)), horizon=5.0, x0=[0.0, 1.0],
        dt=dt, scheme_order=scheme_order)
    kwargs.update(overrides)
    return validate_spec(ProblemSpec(**kwargs))


def make_test2_spec(**overrides) -> ProblemSpec:
    kwargs = dict(
        a_true=TEST2_A, b=TEST2_B, q=0.25 * np.eye(4), r=np.eye(3) / 3.0,
        q_f=np.eye(4), horizon=10.0, x0=np.ones(4),
        dt=0.025, scheme_order=2, steps_per_round=4)
    kwargs.update(overrides)
    return validate_spec(ProblemSpec(**kwargs))


@pytest.fixture(scope="session")
def test1_spec() -> ProblemSpec:
    return make_test1_spec()


@pytest.fixture(scope="session")
def test2_spec() -> ProblemSpec:
    return make_test2_spec()


@pytest.fixture(scope="session", autouse=True)
def warm_compiled_kernels():
    # trigger the one-time numba compile outside any timed assertion
    solve_backward(np.zeros((1, 1)), validate_spec(ProblemSpec(
        a_true=[[0.0]], b=[[1.0]], q=[[1.0]], r=[[1.0]], q_f=[[0.0]],
        horizon=0.2, x0=[0.0], dt=0.1)), 0.0)
