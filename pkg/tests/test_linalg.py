import numpy as np
import pytest

from pairlab.linalg import NumericalError, cov_sqrt, pinv, svd, sym_eig, truncate


def random_spd(rng, n):
    b = rng.standard_normal((n, n))
    return b @ b.T + np.eye(n)


class TestSvd:
    def test_identity(self):
        d = svd(np.eye(3))
        np.testing.assert_allclose(d.s, [1.0, 1.0, 1.0])

    def test_diagonal(self):
        d = svd(np.diag([3.0, 2.0, 1.0]))
        np.testing.assert_allclose(d.s, [3.0, 2.0, 1.0])
        np.testing.assert_allclose(np.abs(d.u), np.eye(3), atol=1e-14)
        np.testing.assert_allclose(np.abs(d.vt), np.eye(3), atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction_and_orthogonality(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((4, 3))
        d = svd(m)
        k = len(d.s)
        recon = d.u[:, :k] @ np.diag(d.s) @ d.vt[:k]
        assert np.linalg.norm(recon - m) / np.linalg.norm(m) < 1e-10
        np.testing.assert_allclose(d.u.T @ d.u, np.eye(4), atol=1e-10)
        np.testing.assert_allclose(d.vt @ d.vt.T, np.eye(3), atol=1e-10)
        assert np.all(np.diff(d.s) <= 0)

    def test_sign_convention_reproducible(self):
        rng = np.random.default_rng(9)
        m = rng.standard_normal((5, 5))
        d1, d2 = svd(m), svd(m.copy())
        np.testing.assert_array_equal(d1.u, d2.u)
        for k in range(5):
            col = d1.u[:, k]
            assert col[np.argmax(np.abs(col))] > 0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestTruncate:
    def test_diagonal_residual(self):
        t = truncate(svd(np.diag([3.0, 2.0, 1.0])), 2)
        m = np.diag([3.0, 2.0, 1.0])
        resid = m - t.u @ np.diag(t.s) @ t.vt
        assert abs(np.linalg.norm(resid, 2) - 1.0) < 1e-12

    def test_full_rank_exact(self):
        rng = np.random.default_rng(1)
        m = rng.standard_normal((4, 6))
        t = truncate(svd(m), 4)
        assert np.linalg.norm(m - t.u @ np.diag(t.s) @ t.vt) / np.linalg.norm(m) < 1e-10

    @pytest.mark.parametrize("seed", range(4))
    def test_residual_matches_next_singular_value(self, seed):
        """Spectral norm of the rank-r residual equals sigma_{r+1}."""
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((5, 5))
        d = svd(m)
        t = truncate(d, 3)
        resid_norm = np.linalg.norm(m - t.u @ np.diag(t.s) @ t.vt, 2)
        assert abs(resid_norm - d.s[3]) < 1e-10

    def test_rank_out_of_range(self):
        d = svd(np.eye(3))
        with pytest.raises(ValueError):
            truncate(d, 0)
        with pytest.raises(ValueError):
            truncate(d, 4)

    def test_orthonormal_blocks(self):
        rng = np.random.default_rng(2)
        t = truncate(svd(rng.standard_normal((6, 4))), 2)
        np.testing.assert_allclose(t.u.T @ t.u, np.eye(2), atol=1e-10)
        np.testing.assert_allclose(t.vt @ t.vt.T, np.eye(2), atol=1e-10)


def penrose_residuals(m, mp):
    return (
        np.linalg.norm(m @ mp @ m - m),
        np.linalg.norm(mp @ m @ mp - mp),
        np.linalg.norm((m @ mp).T - m @ mp),
        np.linalg.norm((mp @ m).T - mp @ m),
    )


class TestPinv:
    def test_identity(self):
        np.testing.assert_allclose(pinv(np.eye(3)), np.eye(3), atol=1e-12)

    def test_rank_deficient_diagonal(self):
        np.testing.assert_allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-14)

    @pytest.mark.parametrize("shape", [(6, 4), (4, 6), (5, 5)])
    def test_penrose_conditions(self, shape):
        rng = np.random.default_rng(sum(shape))
        m = rng.standard_normal(shape)
        mp = pinv(m)
        scale = np.linalg.norm(m)
        assert all(r / scale < 1e-8 for r in penrose_residuals(m, mp))

    def test_penrose_rank_deficient(self):
        rng = np.random.default_rng(3)
        base = rng.standard_normal((6, 2))
        m = base @ rng.standard_normal((2, 4))  # rank 2
        mp = pinv(m)
        scale = np.linalg.norm(m)
        assert all(r / scale < 1e-8 for r in penrose_residuals(m, mp))


class TestSymEig:
    def test_identity(self):
        e = sym_eig(np.eye(4))
        np.testing.assert_allclose(e.values, np.ones(4))

    def test_diagonal(self):
        e = sym_eig(np.diag([4.0, 1.0]))
        np.testing.assert_allclose(e.values, [4.0, 1.0])
        np.testing.assert_allclose(np.abs(e.vectors), np.eye(2), atol=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_spd_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        g = random_spd(rng, 5)
        e = sym_eig(g)
        recon = e.vectors @ np.diag(e.values) @ e.vectors.T
        assert np.linalg.norm(recon - g) / np.linalg.norm(g) < 1e-10
        assert np.all(e.values > 0)
        assert np.all(np.diff(e.values) <= 0)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="not symmetric"):
            sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestCovSqrt:
    def test_identity(self):
        np.testing.assert_allclose(cov_sqrt(np.eye(3)), np.eye(3), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(cov_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_factorization(self, seed):
        rng = np.random.default_rng(seed)
        g = random_spd(rng, 6)
        factor = cov_sqrt(g)
        assert np.linalg.norm(factor @ factor.T - g) / np.linalg.norm(g) < 1e-10

    def test_left_vectors_match_eigenvectors(self):
        """svd(L).u must equal sym_eig(G).vectors up to column sign."""
        rng = np.random.default_rng(8)
        g = random_spd(rng, 5)
        factor = cov_sqrt(g)
        u_l = svd(factor).u
        vecs = sym_eig(g).vectors
        overlap = np.abs(u_l.T @ vecs)
        np.testing.assert_allclose(overlap, np.eye(5), atol=1e-8)
        np.testing.assert_allclose(svd(factor).s, np.sqrt(sym_eig(g).values), rtol=1e-10)

    def test_rejects_non_spd(self):
        with pytest.raises(ValueError, match="smallest eigenvalue"):
            cov_sqrt(np.diag([1.0, -0.5]))
