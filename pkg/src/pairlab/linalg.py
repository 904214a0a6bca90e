"""Dense real-matrix primitives for the optimal linear pair construction.

Thin, contract-enforcing wrappers around LAPACK (via numpy.linalg) that pin
down the conventions the rest of the package relies on: descending spectra
with a deterministic tie-break, a fixed column-sign convention so factors are
reproducible across runs, and explicit error types for numerical failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericalError(RuntimeError):
    """An underlying factorization failed to converge or a system is singular."""


@dataclass(frozen=True)
class SvdResult:
    """Full SVD M = u @ diag(s) @ vt with orthogonal u (q x q) and vt (n x n)."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


@dataclass(frozen=True)
class TruncatedSvd:
    """Leading rank-r factors: u (q x r), s (r,), vt (r x n)."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    rank: int


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition G = vectors @ diag(values) @ vectors.T, values descending."""

    vectors: np.ndarray
    values: np.ndarray


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _fix_signs(u: np.ndarray, vt: np.ndarray | None = None) -> None:
    """Flip columns of u (and matching rows of vt) so the largest-|entry| is positive.

    Operates in place; deterministic, making repeated factorizations bitwise
    comparable even when LAPACK's sign choice is arbitrary.
    """
    for k in range(u.shape[1]):
        col = u[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            u[:, k] = -col
            if vt is not None:
                vt[k, :] = -vt[k, :]


def svd(m) -> SvdResult:
    """Full singular value decomposition with descending singular values.

    Raises NumericalError if the underlying iteration does not converge.
    """
    m = _as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    # LAPACK already returns a descending spectrum; re-sort defensively with a
    # stable key so equal singular values keep their original order.
    order = np.argsort(-s, kind="stable")
    s = s[order]
    k = len(s)
    u[:, :k] = u[:, order]
    vt[:k, :] = vt[order, :]
    _fix_signs(u[:, :k], vt[:k, :])
    _fix_signs(u[:, k:])
    _fix_signs(vt[k:, :].T)
    return SvdResult(u=u, s=s, vt=vt)


def truncate(decomposition: SvdResult, rank: int) -> TruncatedSvd:
    """Retain the leading `rank` singular triplets of a full SVD."""
    q = decomposition.u.shape[0]
    n = decomposition.vt.shape[0]
    if not 1 <= rank <= min(q, n):
        raise ValueError(f"rank must be in [1, {min(q, n)}], got {rank}")
    return TruncatedSvd(
        u=decomposition.u[:, :rank].copy(),
        s=decomposition.s[:rank].copy(),
        vt=decomposition.vt[:rank, :].copy(),
        rank=rank,
    )


def pinv(m, rcond: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values <= rcond * s_max are treated as zero. The default rcond is
    max(rows, cols) * machine epsilon.
    """
    m = _as_matrix(m)
    if rcond is None:
        rcond = max(m.shape) * np.finfo(float).eps
    if rcond < 0:
        raise ValueError("rcond must be >= 0")
    dec = svd(m)
    s = dec.s
    cutoff = rcond * (s[0] if len(s) else 0.0)
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    k = len(s)
    return (dec.vt[:k, :].T * inv_s) @ dec.u[:, :k].T


def sym_eig(g, sym_tol: float = 1e-12) -> SymEig:
    """Symmetric eigendecomposition, values descending with stable index tie-break.

    The input is symmetrized by averaging with its transpose; asymmetry beyond
    sym_tol (relative to the largest entry) is an error.
    """
    g = _as_matrix(g)
    if g.shape[0] != g.shape[1]:
        raise ValueError("sym_eig requires a square matrix")
    scale = max(np.max(np.abs(g)), 1.0)
    asym = np.max(np.abs(g - g.T))
    if asym > sym_tol * scale:
        raise ValueError(f"matrix is not symmetric: max asymmetry {asym:.3e}")
    sym = 0.5 * (g + g.T)
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    _fix_signs(vectors)
    return SymEig(vectors=vectors, values=values)


def cov_sqrt(g, spd_tol: float = 1e-12) -> np.ndarray:
    """Symmetric eigen square root L = U diag(sqrt(lambda)) U^T of an SPD matrix.

    L L^T = G, the left singular vectors of L are exactly the eigenvectors of
    G, and its singular values are sqrt(lambda) — the factorization the
    optimal linear pair construction consumes directly.
    """
    dec = sym_eig(g)
    lam_max = dec.values[0]
    if lam_max <= 0 or dec.values[-1] <= spd_tol * lam_max:
        raise ValueError(
            f"matrix is not SPD: smallest eigenvalue {dec.values[-1]:.6e}"
        )
    return (dec.vectors * np.sqrt(dec.values)) @ dec.vectors.T
