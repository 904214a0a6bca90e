import numpy as np
import pytest

from pairlab.masks import apply_mask, make_mask


class TestMakeMask:
    def test_paper_setting_45_of_181_columns(self):
        """25% of 181 angles is exactly 45 zeroed columns."""
        mask = make_mask("random-columns", (96, 181), 45 / 181, seed=0)
        assert len(mask.zero_columns) == 45
        assert len(mask.zero_idx) == 45 * 96

    def test_zero_fraction_behaves_like_identity(self):
        mask = make_mask("random-columns", (4, 6), 0.0, seed=1)
        y = np.arange(24.0)
        np.testing.assert_array_equal(apply_mask(mask, y), y)

    def test_full_fraction_zeroes_everything(self):
        mask = make_mask("random-entries", (4, 6), 1.0, seed=1)
        np.testing.assert_array_equal(apply_mask(mask, np.ones(24)), np.zeros(24))

    def test_block_columns_contiguous(self):
        mask = make_mask("block-columns", (3, 10), 0.4, seed=5)
        cols = mask.zero_columns
        assert len(cols) == 4
        np.testing.assert_array_equal(cols, np.arange(cols[0], cols[0] + 4))

    def test_sizes_match_round(self):
        mask = make_mask("random-entries", (5, 8), 0.33, seed=2)
        assert len(mask.zero_idx) == round(0.33 * 40)

    def test_identity_ignores_fraction(self):
        mask = make_mask("identity", (5, 8), 0.9, seed=2)
        assert len(mask.zero_idx) == 0

    def test_fraction_out_of_range(self):
        with pytest.raises(ValueError):
            make_mask("random-columns", (4, 6), 1.5, seed=0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_mask("checkerboard", (4, 6), 0.5, seed=0)

    def test_deterministic_per_seed(self):
        m1 = make_mask("random-entries", (6, 6), 0.5, seed=3)
        m2 = make_mask("random-entries", (6, 6), 0.5, seed=3)
        m3 = make_mask("random-entries", (6, 6), 0.5, seed=4)
        np.testing.assert_array_equal(m1.zero_idx, m2.zero_idx)
        assert not np.array_equal(m1.zero_idx, m3.zero_idx)


class TestApplyMask:
    def test_index_bookkeeping(self):
        rng = np.random.default_rng(0)
        mask = make_mask("random-entries", 10, 0.3, seed=7)
        y = rng.standard_normal(10)
        out = apply_mask(mask, y)
        assert len(mask.zero_idx) == 3
        np.testing.assert_array_equal(out[mask.zero_idx], np.zeros(3))
        kept = np.setdiff1d(np.arange(10), mask.zero_idx)
        np.testing.assert_array_equal(out[kept], y[kept])

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        mask = make_mask("block-columns", (4, 8), 0.5, seed=1)
        y = rng.standard_normal(32)
        once = apply_mask(mask, y)
        np.testing.assert_array_equal(apply_mask(mask, once), once)

    def test_linear(self):
        rng = np.random.default_rng(2)
        mask = make_mask("random-columns", (4, 8), 0.25, seed=2)
        u, v = rng.standard_normal(32), rng.standard_normal(32)
        lhs = apply_mask(mask, 2.5 * u - 1.25 * v)
        rhs = 2.5 * apply_mask(mask, u) - 1.25 * apply_mask(mask, v)
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    def test_operator_norm_one_off_zero_set(self):
        """beta_P = 1: vectors supported off the zero set pass unchanged."""
        mask = make_mask("random-entries", 12, 0.25, seed=3)
        v = mask.keep * np.arange(1.0, 13.0)
        np.testing.assert_array_equal(apply_mask(mask, v), v)
        w = np.zeros(12)
        w[mask.zero_idx] = 1.0
        np.testing.assert_array_equal(apply_mask(mask, w), np.zeros(12))

    def test_shape_mismatch(self):
        mask = make_mask("identity", 10, 0.0, seed=0)
        with pytest.raises(ValueError):
            apply_mask(mask, np.ones(11))

    def test_batch_rows(self):
        mask = make_mask("random-entries", 6, 0.5, seed=4)
        y = np.ones((3, 6))
        out = apply_mask(mask, y)
        assert out.shape == (3, 6)
        np.testing.assert_array_equal(out[:, mask.zero_idx], np.zeros((3, 3)))
