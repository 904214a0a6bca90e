import numpy as np
import pytest

from pairlab.dataset import Normalization
from pairlab.lbfgs import LbfgsConfig
from pairlab.linear_pair import closed_form_lsi_zx, closed_form_lsi_zy, optimal_linear_pair
from pairlab.lsi import (
    lsi_observation_space,
    lsi_parameter_space,
    model_space_lsi,
    tikhonov_baseline,
)
from pairlab.masks import apply_mask, make_mask
from pairlab.pair_net import PairSpec, init_model

TIGHT = LbfgsConfig(max_iterations=50, gradient_tolerance=1e-12, c2=0.1)


def random_pair(seed, n=8, q=12, lx=4, ly=5):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((q, n))
    b = rng.standard_normal((n, n))
    c = rng.standard_normal((q, q))
    pair = optimal_linear_pair(a, b @ b.T + np.eye(n), 0.1 * (c @ c.T) + np.eye(q), lx, ly)
    return pair, rng


def small_model(seed=0, n=10, q=14):
    spec = PairSpec.default(n, q, latent_x=4, latent_y=5, hidden_x=(8,), hidden_y=(12,))
    return init_model(spec, Normalization(0.1, 1.3, -0.2, 0.8), seed=seed)


class TestObservationSpace:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_closed_form_on_linear_pairs(self, seed):
        pair, rng = random_pair(seed)
        mask = make_mask("random-entries", 12, 0.4, seed)
        y_sub = apply_mask(mask, rng.standard_normal(12))
        _, x_cf = closed_form_lsi_zy(pair, mask, y_sub)
        run = lsi_observation_space(pair, mask, y_sub, TIGHT)
        assert np.linalg.norm(run.x - x_cf) / max(np.linalg.norm(x_cf), 1e-12) < 1e-6

    def test_attainable_zero_residual(self):
        """y exactly in the decoder range with no mask reaches ~zero misfit."""
        model = small_model(3)
        z_true = np.random.default_rng(4).standard_normal(5)
        y = model.denorm_y(model.decode_y(z_true))
        mask = make_mask("identity", 14, 0.0, 0)
        run = lsi_observation_space(model, mask, y, TIGHT)
        assert run.final_residual < 1e-8

    def test_zero_data_stationary_for_linear(self):
        pair, _ = random_pair(7)
        mask = make_mask("identity", 12, 0.0, 0)
        run = lsi_observation_space(pair, mask, np.zeros(12), TIGHT)
        assert run.iterations == 0
        np.testing.assert_array_equal(run.z, np.zeros(5))
        np.testing.assert_array_equal(run.x, np.zeros(8))

    def test_statement1_residual_never_worse_than_init(self):
        for seed in range(5):
            model = small_model(seed)
            mask = make_mask("random-entries", 14, 0.5, seed)
            y_sub = apply_mask(mask, np.random.default_rng(seed).standard_normal(14))
            run = lsi_observation_space(model, mask, y_sub, LbfgsConfig(max_iterations=10))
            assert run.final_residual <= run.initial_residual

    def test_identity_mask_equals_unmasked_formulation(self):
        """With P = I the masked objective is the plain data misfit."""
        model = small_model(9)
        rng = np.random.default_rng(9)
        y = rng.standard_normal(14)
        mask = make_mask("identity", 14, 0.0, 0)
        run = lsi_observation_space(model, mask, y, LbfgsConfig(max_iterations=15))
        # reference: explicit unmasked objective through the same solver
        from pairlab.autodiff import Tape
        from pairlab.lbfgs import lbfgs_minimize

        target = model.norm_y(y)

        def unmasked(z):
            tape = Tape()
            zn = tape.leaf(z)
            out = model.d_y.forward(tape, zn)
            root = tape.sq_norm(tape.shift(out, -target))
            tape.backward(root)
            return float(root.value), np.array(zn.grad)

        z0 = model.encode_y(model.norm_y(y))
        ref = lbfgs_minimize(unmasked, z0, LbfgsConfig(max_iterations=15))
        np.testing.assert_allclose(run.z, ref.z, atol=1e-6)

    def test_latent_penalty_keeps_solution_near_init(self):
        model = small_model(11)
        mask = make_mask("random-entries", 14, 0.3, 2)
        y_sub = apply_mask(mask, np.random.default_rng(11).standard_normal(14))
        free = lsi_observation_space(model, mask, y_sub, TIGHT)
        pinned = lsi_observation_space(model, mask, y_sub, TIGHT, latent_penalty=100.0)
        z0 = model.encode_y(model.norm_y(y_sub))
        assert np.linalg.norm(pinned.z - z0) < np.linalg.norm(free.z - z0)
        assert pinned.final_residual <= pinned.initial_residual


class TestParameterSpace:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_closed_form_on_linear_pairs(self, seed):
        pair, rng = random_pair(seed, lx=4, ly=6)
        mask = make_mask("random-entries", 12, 0.4, seed + 100)
        y_sub = apply_mask(mask, rng.standard_normal(12))
        _, x_cf = closed_form_lsi_zx(pair, mask, y_sub)
        run = lsi_parameter_space(pair, mask, y_sub, TIGHT)
        assert np.linalg.norm(run.x - x_cf) / max(np.linalg.norm(x_cf), 1e-12) < 1e-6

    def test_consistent_data_reaches_zero_residual(self):
        model = small_model(5)
        z_true = np.random.default_rng(6).standard_normal(4)
        y = model.denorm_y(model.decode_y(model.map_fwd(z_true)))
        mask = make_mask("identity", 14, 0.0, 0)
        run = lsi_parameter_space(model, mask, y, TIGHT)
        assert run.final_residual < 1e-8

    def test_objective_at_result_not_above_init(self):
        model = small_model(8)
        mask = make_mask("block-columns", (2, 7), 0.4, 1)
        y_sub = apply_mask(mask, np.random.default_rng(8).standard_normal(14))
        run = lsi_parameter_space(model, mask, y_sub, LbfgsConfig(max_iterations=8))
        assert run.final_residual <= run.initial_residual


class TestModelSpace:
    def test_feasible_instance_reaches_small_residual(self):
        """Noiseless y = A d_x(z) with no mask is exactly attainable."""
        pair, rng = random_pair(12, n=8, q=12, lx=4, ly=6)
        a = rng.standard_normal((12, 8))
        z_true = rng.standard_normal(4)
        y = a @ pair.decode_x(z_true)
        mask = make_mask("identity", 12, 0.0, 0)
        runs = model_space_lsi(
            pair, a, mask, y, TIGHT, ensemble=3, seed=0,
            mean_x=np.zeros(8), perturbation=0.5,
        )
        assert min(r.final_residual for r in runs) < 1e-6

    def test_zero_perturbation_deterministic(self):
        model = small_model(13)
        rng = np.random.default_rng(13)
        a = rng.standard_normal((14, 10))
        mask = make_mask("random-entries", 14, 0.2, 3)
        y_sub = apply_mask(mask, rng.standard_normal(14))
        kw = dict(config=LbfgsConfig(max_iterations=5), ensemble=1, seed=5,
                  mean_x=np.zeros(10), perturbation=0.0)
        r1 = model_space_lsi(model, a, mask, y_sub, **kw)
        r2 = model_space_lsi(model, a, mask, y_sub, **kw)
        assert len(r1) == 1
        np.testing.assert_array_equal(r1[0].z, r2[0].z)

    def test_ensemble_members_distinct_and_reproducible(self):
        model = small_model(14)
        rng = np.random.default_rng(14)
        a = rng.standard_normal((14, 10))
        mask = make_mask("identity", 14, 0.0, 0)
        y = rng.standard_normal(14)
        kw = dict(config=LbfgsConfig(max_iterations=2), ensemble=5, seed=21,
                  mean_x=np.zeros(10))
        runs1 = model_space_lsi(model, a, mask, y, **kw)
        runs2 = model_space_lsi(model, a, mask, y, **kw)
        assert len(runs1) == 5
        starts = {tuple(np.round(r.history, 12)) for r in runs1}
        assert len(starts) == 5  # distinct initial points -> distinct paths
        for u, v in zip(runs1, runs2):
            np.testing.assert_array_equal(u.z, v.z)


class TestTikhonov:
    def test_identity_halving(self):
        y = np.array([2.0, -4.0])
        np.testing.assert_allclose(tikhonov_baseline(np.eye(2), y, 1.0), y / 2)

    def test_small_lambda_limit_inverts(self):
        rng = np.random.default_rng(15)
        a = rng.standard_normal((5, 5)) + 5 * np.eye(5)
        y = rng.standard_normal(5)
        x = tikhonov_baseline(a, y, 1e-12)
        assert np.linalg.norm(x - np.linalg.solve(a, y)) < 1e-4

    def test_normal_equation_residual(self):
        rng = np.random.default_rng(16)
        a = rng.standard_normal((9, 4))
        y = rng.standard_normal(9)
        lam = 0.37
        x = tikhonov_baseline(a, y, lam)
        grad = a.T @ (a @ x - y) + lam * x
        assert np.linalg.norm(grad) < 1e-8

    def test_lambda_must_be_positive(self):
        with pytest.raises(ValueError):
            tikhonov_baseline(np.eye(2), np.ones(2), 0.0)
