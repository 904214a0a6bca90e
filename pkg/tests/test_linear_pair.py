import numpy as np
import pytest

from pairlab.linalg import pinv
from pairlab.linear_pair import (
    LinearPair,
    closed_form_lsi_zx,
    closed_form_lsi_zy,
    load_linear_pair,
    mmse_oracle,
    optimal_linear_pair,
    pair_inverse_linear,
    save_linear_pair,
    second_moment,
)
from pairlab.masks import apply_mask, make_mask


def random_instance(seed, n=4, q=5):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((q, n))
    b = rng.standard_normal((n, n))
    c = rng.standard_normal((q, q))
    return a, b @ b.T + np.eye(n), 0.1 * (c @ c.T) + np.eye(q), rng


class TestConstruction:
    def test_isotropic_case(self):
        """A = I, unit prior, sigma^2 noise: every factor is a scaled identity."""
        sigma2 = 1.0
        pair = optimal_linear_pair(np.eye(3), np.eye(3), sigma2 * np.eye(3), 3, 3)
        np.testing.assert_allclose(pair.m_bwd, np.eye(3) / (1 + sigma2), atol=1e-12)
        recon_map = pair.d_x @ pair.m_bwd @ pair.e_y
        np.testing.assert_allclose(recon_map, np.eye(3) / (1 + sigma2), atol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_orthonormal_rows(self, seed):
        a, gx, ge, _ = random_instance(seed)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        np.testing.assert_allclose(pair.e_x @ pair.e_x.T, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(pair.e_y @ pair.e_y.T, np.eye(4), atol=1e-10)
        np.testing.assert_array_equal(pair.d_x, pair.e_x.T)
        np.testing.assert_array_equal(pair.d_y, pair.e_y.T)

    @pytest.mark.parametrize("seed", range(4))
    def test_full_rank_mmse_identity(self, seed):
        """At full latent dims the reconstruction map is the MMSE estimator."""
        a, gx, ge, rng = random_instance(seed, n=4, q=5)
        pair = optimal_linear_pair(a, gx, ge, 4, 5)
        y = rng.standard_normal(5)
        oracle = mmse_oracle(a, gx, ge, y)
        got = pair_inverse_linear(pair, y)
        assert np.linalg.norm(got - oracle) / np.linalg.norm(oracle) < 1e-8

    def test_spectra_descending_positive(self):
        a, gx, ge, _ = random_instance(7)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        assert np.all(pair.spectrum_x > 0) and np.all(np.diff(pair.spectrum_x) <= 0)
        assert np.all(pair.spectrum_y > 0) and np.all(np.diff(pair.spectrum_y) <= 0)

    def test_latent_exceeding_rank(self):
        a = np.eye(3)
        gx_low = np.diag([1.0, 1e-16, 1e-16]) + 0  # numerically rank 1
        with pytest.raises(ValueError, match="not SPD|rank"):
            optimal_linear_pair(a, gx_low, np.eye(3), 3, 3)

    def test_non_spd_rejected(self):
        with pytest.raises(ValueError):
            optimal_linear_pair(np.eye(2), np.diag([1.0, -1.0]), np.eye(2), 2, 2)


class TestPairInverse:
    def test_isotropic_halving(self):
        pair = optimal_linear_pair(np.eye(3), np.eye(3), np.eye(3), 3, 3)
        y = np.array([2.0, -4.0, 6.0])
        np.testing.assert_allclose(pair_inverse_linear(pair, y), y / 2, atol=1e-12)

    def test_zero_maps_to_zero(self):
        a, gx, ge, _ = random_instance(1)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        np.testing.assert_array_equal(pair_inverse_linear(pair, np.zeros(5)), np.zeros(4))

    def test_length_mismatch(self):
        a, gx, ge, _ = random_instance(2)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        with pytest.raises(ValueError):
            pair_inverse_linear(pair, np.zeros(6))


class TestClosedFormZy:
    def test_identity_mask_full_rank_equals_direct_inverse(self):
        a, gx, ge, rng = random_instance(3, n=4, q=6)
        pair = optimal_linear_pair(a, gx, ge, 4, 6)
        mask = make_mask("identity", 6, 0.0, 0)
        y = rng.standard_normal(6)
        z, x = closed_form_lsi_zy(pair, mask, y)
        np.testing.assert_allclose(z, pair.encode_y(y), atol=1e-10)
        np.testing.assert_allclose(x, pair_inverse_linear(pair, y), atol=1e-10)

    def test_zero_data(self):
        a, gx, ge, _ = random_instance(4)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        mask = make_mask("random-entries", 5, 0.4, 1)
        z, x = closed_form_lsi_zy(pair, mask, np.zeros(5))
        np.testing.assert_array_equal(z, np.zeros(4))
        np.testing.assert_array_equal(x, np.zeros(4))

    def test_normal_equation_residual(self):
        a, gx, ge, rng = random_instance(5, n=5, q=8)
        pair = optimal_linear_pair(a, gx, ge, 4, 5)
        mask = make_mask("random-entries", 8, 0.25, 2)
        y_sub = apply_mask(mask, rng.standard_normal(8))
        z, _ = closed_form_lsi_zy(pair, mask, y_sub)
        design = mask.keep[:, None] * pair.d_y
        grad = design.T @ (design @ z - y_sub)
        assert np.linalg.norm(grad) < 1e-8

    def test_grid_search_local_optimality(self):
        """The closed-form latent beats every point on a grid around it."""
        a, gx, ge, rng = random_instance(6, n=4, q=6)
        pair = optimal_linear_pair(a, gx, ge, 3, 3)
        mask = make_mask("random-entries", 6, 2 / 6, 3)
        y_sub = apply_mask(mask, rng.standard_normal(6))
        z, _ = closed_form_lsi_zy(pair, mask, y_sub)
        design = mask.keep[:, None] * pair.d_y

        def resid(zz):
            return float(np.sum((design @ zz - y_sub) ** 2))

        base = resid(z)
        offsets = np.linspace(-0.2, 0.2, 10)
        for du in offsets:
            for dv in offsets:
                for dw in offsets:
                    assert base <= resid(z + np.array([du, dv, dw])) + 1e-12

    def test_rejects_unmasked_input(self):
        a, gx, ge, rng = random_instance(7)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        mask = make_mask("random-entries", 5, 0.4, 1)
        y = rng.standard_normal(5) + 10.0  # nonzero everywhere
        with pytest.raises(ValueError, match="masked"):
            closed_form_lsi_zy(pair, mask, y)


class TestClosedFormZx:
    def test_identity_mask_full_rank_matches_projected_pseudoinverse(self):
        """x_hat = U_x U_x^T A^+ U_y U_y^T y at full dims with no mask."""
        a, gx, ge, rng = random_instance(8, n=4, q=6)
        pair = optimal_linear_pair(a, gx, ge, 4, 6)
        mask = make_mask("identity", 6, 0.0, 0)
        y = rng.standard_normal(6)
        _, x = closed_form_lsi_zx(pair, mask, y)
        u_x, u_y = pair.d_x, pair.d_y
        expected = u_x @ u_x.T @ pinv(a) @ u_y @ u_y.T @ y
        assert np.linalg.norm(x - expected) / np.linalg.norm(expected) < 1e-8

    def test_zero_data(self):
        a, gx, ge, _ = random_instance(9)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        mask = make_mask("block-columns", (1, 5), 0.4, 1)
        _, x = closed_form_lsi_zx(pair, mask, np.zeros(5))
        np.testing.assert_array_equal(x, np.zeros(4))

    def test_normal_equation_residual(self):
        a, gx, ge, rng = random_instance(10, n=5, q=8)
        pair = optimal_linear_pair(a, gx, ge, 3, 5)
        mask = make_mask("random-entries", 8, 0.25, 4)
        y_sub = apply_mask(mask, rng.standard_normal(8))
        z, _ = closed_form_lsi_zx(pair, mask, y_sub)
        design = mask.keep[:, None] * (pair.d_y @ pair.m_fwd)
        assert np.linalg.norm(design.T @ (design @ z - y_sub)) < 1e-8


class TestMmseOracle:
    def test_isotropic(self):
        y = np.array([1.0, 2.0])
        np.testing.assert_allclose(mmse_oracle(np.eye(2), np.eye(2), np.eye(2), y), y / 2)

    def test_noiseless_limit_inverts(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        y = rng.standard_normal(4)
        x = mmse_oracle(a, np.eye(4), 1e-12 * np.eye(4), y)
        assert np.linalg.norm(x - np.linalg.solve(a, y)) < 1e-4

    def test_matches_closed_form_at_full_rank(self):
        a, gx, ge, rng = random_instance(12, n=5, q=7)
        pair = optimal_linear_pair(a, gx, ge, 5, 7)
        mask = make_mask("identity", 7, 0.0, 0)
        y = rng.standard_normal(7)
        _, x = closed_form_lsi_zy(pair, mask, y)
        oracle = mmse_oracle(a, gx, ge, y)
        assert np.linalg.norm(x - oracle) / np.linalg.norm(oracle) < 1e-8


class TestScaleAndDivergence:
    def test_scale_covariance(self):
        a, gx, ge, rng = random_instance(13)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        mask = make_mask("random-entries", 5, 0.2, 5)
        y_sub = apply_mask(mask, rng.standard_normal(5))
        z1, x1 = closed_form_lsi_zy(pair, mask, y_sub)
        z2, x2 = closed_form_lsi_zy(pair, mask, 3.0 * y_sub)
        np.testing.assert_allclose(z2, 3.0 * z1, atol=1e-12)
        np.testing.assert_allclose(x2, 3.0 * x1, atol=1e-12)

    def test_records_zx_zy_divergence(self):
        """The z_x and z_y routes coincide only in the noiseless invertible
        limit; with noise they differ by the spectral scaling of the backward
        map. The noisy divergence is recorded (printed), not asserted.
        """
        rng = np.random.default_rng(14)
        n = 5
        a = rng.standard_normal((n, n)) + 4 * np.eye(n)  # square, well-conditioned
        b = rng.standard_normal((n, n))
        gx = b @ b.T + np.eye(n)
        y = rng.standard_normal(n)
        mask = make_mask("identity", n, 0.0, 0)
        limit = optimal_linear_pair(a, gx, 1e-12 * np.eye(n), n, n)
        _, x_zy = closed_form_lsi_zy(limit, mask, y)
        _, x_zx = closed_form_lsi_zx(limit, mask, y)
        assert np.linalg.norm(x_zy - x_zx) / np.linalg.norm(x_zy) < 1e-6
        noisy = optimal_linear_pair(a, gx, 0.5 * np.eye(n), n, n)
        _, t_zy = closed_form_lsi_zy(noisy, mask, y)
        _, t_zx = closed_form_lsi_zx(noisy, mask, y)
        gap = np.linalg.norm(t_zy - t_zx) / np.linalg.norm(t_zy)
        print(f"noisy zx/zy divergence: {gap:.3e}")


class TestMomentsAndSerialization:
    def test_second_moment_spd_with_few_samples(self):
        rng = np.random.default_rng(15)
        samples = rng.standard_normal((3, 6))  # fewer samples than dim
        gamma = second_moment(samples)
        assert np.all(np.linalg.eigvalsh(gamma) > 0)

    def test_round_trip(self, tmp_path):
        a, gx, ge, _ = random_instance(16)
        pair = optimal_linear_pair(a, gx, ge, 3, 4)
        path = tmp_path / "pair.json"
        save_linear_pair(pair, path)
        loaded = load_linear_pair(path)
        for name in ("e_x", "e_y", "m_fwd", "m_bwd", "spectrum_x", "spectrum_y"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(pair, name))
        assert isinstance(loaded, LinearPair)
