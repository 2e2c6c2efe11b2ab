import numpy as np
import pytest

from online_lqr import (ProblemSpec, RegressionBatch, bayes_update,
                        build_stencils, extract_observations, make_prior,
                        rollout, validate_spec)

from conftest import make_test1_spec


def random_batch(rng, n, cols):
    return RegressionBatch(regressors=rng.normal(size=(n, cols)),
                           targets=rng.normal(size=(n, cols)))


class TestPrior:
    def test_default_prior_test1(self):
        prior = make_prior(2, 1)
        assert np.array_equal(prior.covariance, 2.0 * np.eye(2))
        assert np.array_equal(prior.row_means, np.zeros((2, 2)))

    def test_default_prior_scales_with_dimensions(self):
        prior = make_prior(4, 3)
        assert np.array_equal(prior.covariance, 12.0 * np.eye(4))

    def test_vector_mean_is_shared_across_rows(self):
        prior = make_prior(2, 1, mean=[1.0, 0.0])
        assert np.array_equal(prior.mean_matrix(), [[1.0, 0.0], [1.0, 0.0]])

    def test_bad_override_rejected(self):
        with pytest.raises(ValueError, match="mean"):
            make_prior(2, 1, mean=[1.0, 0.0, 3.0])
        with pytest.raises(ValueError, match="positive definite"):
            make_prior(2, 1, cov=[[1.0, 0.0], [0.0, -1.0]])


class TestStencils:
    def test_first_order_forward_difference(self):
        table = build_stencils(1)
        assert np.allclose(table.weights, [[-1.0, 1.0]], atol=1e-14)

    def test_second_order_one_sided_weights(self):
        table = build_stencils(2)
        assert np.allclose(table.weights[0], [-1.5, 2.0, -0.5], atol=1e-13)
        assert np.allclose(table.weights[1], [-0.5, 0.0, 0.5], atol=1e-13)

    def test_second_order_exact_on_parabola(self):
        table = build_stencils(2)
        nodes = np.array([0.0, 0.1, 0.2])
        estimate = table.weights[0] @ nodes**2 / 0.1
        assert estimate == pytest.approx(0.0, abs=1e-13)

    @pytest.mark.parametrize("order", [1, 2, 4])
    @pytest.mark.parametrize("dt", [0.1, 0.01])
    def test_moment_exactness(self, order, dt):
        table = build_stencils(order)
        nodes = 0.3 + dt * np.arange(order + 1)
        for degree in range(order + 1):
            exact = degree * nodes**(degree - 1) if degree else np.zeros_like(nodes)
            for k in range(order):
                estimate = table.weights[k] @ nodes**degree / dt
                assert abs(estimate - exact[k]) <= 1e-10 / dt

    def test_unsupported_order_rejected(self):
        with pytest.raises(ValueError, match="unsupported"):
            build_stencils(3)


class TestExtractObservations:
    def test_frozen_plant_gives_zero_targets(self):
        spec = validate_spec(ProblemSpec(
            a_true=np.zeros((2, 2)), b=np.zeros((2, 1)), q=np.eye(2),
            r=[[1.0]], q_f=np.zeros((2, 2)), horizon=1.0, x0=[1.0, 2.0],
            dt=0.5, scheme_order=1, steps_per_round=2))
        states = np.tile([1.0, 2.0], (3, 1))
        controls = np.zeros((2, 1))
        batch = extract_observations(states, controls, spec)
        assert batch.n_columns == 2
        assert np.all(batch.targets == 0.0)

    def test_first_order_forward_difference_value(self):
        spec = validate_spec(ProblemSpec(
            a_true=[[0.0]], b=[[0.0]], q=[[1.0]], r=[[1.0]], q_f=[[0.0]],
            horizon=0.2, x0=[1.0], dt=0.1, steps_per_round=2))
        states = np.array([[1.0], [1.2], [1.3]])
        batch = extract_observations(states, np.zeros((2, 1)), spec)
        assert batch.targets[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert batch.regressors[0, 0] == 1.0

    def test_second_order_target_accuracy_improves_with_dt(self):
        # plant dx/dt = 2x sampled exactly; the block-start stencil target
        # should approach 2*x(0) at second order
        errors = []
        for dt in (0.05, 0.025, 0.0125):
            spec = validate_spec(ProblemSpec(
                a_true=[[2.0]], b=[[0.0]], q=[[1.0]], r=[[1.0]], q_f=[[0.0]],
                horizon=40 * dt, x0=[1.0], dt=dt, scheme_order=2,
                steps_per_round=4))
            nodes = np.exp(2.0 * dt * np.arange(3)).reshape(-1, 1)
            batch = extract_observations(nodes, np.zeros((2, 1)), spec)
            errors.append(abs(batch.targets[0, 0] - 2.0))
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 1.9)

    def test_one_column_per_block(self):
        spec = make_test1_spec(dt=0.1, scheme_order=2, steps_per_round=4)
        states = np.random.default_rng(0).normal(size=(5, 2))
        controls = np.repeat(np.array([[0.3], [-0.7]]), 2, axis=0)
        batch = extract_observations(states, controls, spec)
        assert batch.n_columns == 2
        assert np.array_equal(batch.regressors[:, 0], states[0])
        assert np.array_equal(batch.regressors[:, 1], states[2])

    def test_all_offsets_layout_keeps_per_step_count(self):
        spec = make_test1_spec(dt=0.1, scheme_order=2, steps_per_round=4,
                               observation_layout="all-offsets")
        states = np.random.default_rng(0).normal(size=(5, 2))
        controls = np.repeat(np.array([[0.3], [-0.7]]), 2, axis=0)
        batch = extract_observations(states, controls, spec)
        assert batch.n_columns == 4

    def test_varying_control_within_block_rejected(self):
        spec = make_test1_spec(dt=0.1, scheme_order=2, steps_per_round=4)
        states = np.zeros((5, 2))
        controls = np.array([[0.3], [0.4], [0.5], [0.5]])
        with pytest.raises(ValueError, match="varies within the block"):
            extract_observations(states, controls, spec)

    def test_inconsistent_slice_rejected(self, test1_spec):
        with pytest.raises(ValueError, match="slice"):
            extract_observations(np.zeros((3, 2)), np.zeros((3, 1)), test1_spec)

    def test_short_trailing_block_emits_nothing(self):
        spec = make_test1_spec(dt=0.1, scheme_order=4, steps_per_round=8)
        states = np.random.default_rng(1).normal(size=(3, 2))   # 2-step slice
        controls = np.tile([[0.5]], (2, 1))
        batch = extract_observations(states, controls, spec)
        assert batch.n_columns == 0


class TestBayesUpdate:
    def test_empty_batch_returns_prior_exactly(self):
        prior = make_prior(3, 2, noise_sigma=0.5)
        batch = RegressionBatch(regressors=np.empty((3, 0)), targets=np.empty((3, 0)))
        assert bayes_update(prior, batch) is prior

    def test_scalar_single_observation_closed_form(self):
        prior = make_prior(1, 1, mean=np.zeros(1), cov=[[1.0]], noise_sigma=1.0)
        batch = RegressionBatch(regressors=np.array([[1.0]]), targets=np.array([[2.0]]))
        posterior = bayes_update(prior, batch)
        assert posterior.covariance[0, 0] == pytest.approx(0.5, abs=1e-14)
        assert posterior.row_means[0, 0] == pytest.approx(1.0, abs=1e-14)
        # cross-check: the posterior density over a grid peaks at the mean
        grid = np.linspace(-2.0, 4.0, 4001)
        log_density = -0.5 * grid**2 - 0.5 * (2.0 - grid)**2
        assert grid[np.argmax(log_density)] == pytest.approx(1.0, abs=2e-3)

    def test_one_round_of_test1_data_pins_the_matrix(self):
        spec = make_test1_spec(dt=0.01, scheme_order=2, steps_per_round=4)
        traj = rollout(spec, lambda k, x: np.zeros(1))
        batch = extract_observations(traj.states[:5], traj.controls[:4], spec)
        prior = make_prior(2, 1, noise_sigma=spec.noise_sigma)
        posterior = bayes_update(prior, batch)
        assert np.max(np.abs(posterior.mean_matrix() - spec.a_true)) < 1e-2

    def test_sequential_equals_batch(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            prior = make_prior(3, 2, mean=rng.normal(size=3),
                               cov=np.eye(3) * rng.uniform(0.5, 3.0),
                               noise_sigma=rng.uniform(0.2, 2.0))
            first = random_batch(rng, 3, 4)
            second = random_batch(rng, 3, 5)
            combined = RegressionBatch(
                regressors=np.hstack([first.regressors, second.regressors]),
                targets=np.hstack([first.targets, second.targets]))
            chained = bayes_update(bayes_update(prior, first), second)
            direct = bayes_update(prior, combined)
            assert np.max(np.abs(chained.row_means - direct.row_means)) < 1e-10
            assert np.max(np.abs(chained.covariance - direct.covariance)) < 1e-10

    def test_covariance_contracts(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            n = rng.integers(1, 5)
            raw = rng.normal(size=(n, n))
            prior = make_prior(n, 2, cov=raw @ raw.T + 0.1 * np.eye(n),
                               noise_sigma=rng.uniform(0.1, 2.0))
            posterior = bayes_update(prior, random_batch(rng, n, int(rng.integers(1, 7))))
            shrink = prior.covariance - posterior.covariance
            assert np.linalg.eigvalsh(shrink).min() >= -1e-10

    def test_ridge_equivalence(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            n, cols = 3, 6
            sigma = rng.uniform(0.3, 1.5)
            raw = rng.normal(size=(n, n))
            cov = raw @ raw.T + np.eye(n)
            prior = make_prior(n, 1, mean=np.zeros(n), cov=cov, noise_sigma=sigma)
            batch = random_batch(rng, n, cols)
            posterior = bayes_update(prior, batch)
            x_mat, y_mat = batch.regressors, batch.targets
            lhs = x_mat @ x_mat.T + sigma**2 * np.linalg.inv(cov)
            direct = np.linalg.solve(lhs, x_mat @ y_mat.T).T
            assert np.max(np.abs(posterior.mean_matrix() - direct)) < 1e-10

    def test_input_belief_unchanged(self):
        rng = np.random.default_rng(37)
        prior = make_prior(2, 1, noise_sigma=1.0)
        before = prior.row_means.copy()
        bayes_update(prior, random_batch(rng, 2, 3))
        assert np.array_equal(prior.row_means, before)

    def test_dimension_mismatch_rejected(self):
        prior = make_prior(2, 1, noise_sigma=1.0)
        with pytest.raises(ValueError, match="dimension"):
            bayes_update(prior, random_batch(np.random.default_rng(0), 3, 2))


class TestEstimationConsistency:
    def test_error_shrinks_linearly_with_dt_on_exact_states(self):
        # first-order scheme on exact uncontrolled trajectories: the final
        # estimate error should fall roughly like dt
        errors = []
        dts = (0.1, 0.05, 0.025, 0.01)
        for dt in dts:
            spec = make_test1_spec(dt=dt)
            traj = rollout(spec, lambda k, x: np.zeros(1))
            belief = make_prior(2, 1, noise_sigma=spec.noise_sigma)
            s = spec.steps_per_round
            for start in range(0, spec.n_steps, s):
                stop = min(start + s, spec.n_steps)
                batch = extract_observations(traj.states[start:stop + 1],
                                             traj.controls[start:stop], spec)
                belief = bayes_update(belief, batch)
            errors.append(np.max(np.abs(belief.mean_matrix() - spec.a_true)))
        assert all(a > b for a, b in zip(errors, errors[1:]))
        slope = np.log(errors[0] / errors[-1]) / np.log(dts[0] / dts[-1])
        assert 0.7 <= slope <= 1.3
