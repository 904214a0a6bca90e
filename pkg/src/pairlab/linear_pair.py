"""Bayes-risk-optimal linear paired autoencoders and their closed-form
latent-space inversions.

The construction takes the forward matrix A and SPD second moments of the
parameter and noise distributions, factors the parameter and observation
moments spectrally, and keeps the leading eigenvector blocks as orthonormal
encoder/decoder pairs. The two latent maps carry the spectral scaling that
distinguishes observation-latent inversion from parameter-latent inversion;
at full latent dimensions with no mask, the observation-latent reconstruction
collapses to the Gaussian MMSE estimator, which mmse_oracle computes
independently by a dense solve for cross-checking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import NumericalError, pinv, sym_eig
from .masks import MaskOperator, apply_mask

SPD_TOL = 1e-12
SPECTRUM_FLOOR = 1e-14


@dataclass(frozen=True)
class LinearPair:
    """Orthonormal linear encoders/decoders plus the two affine-free latent maps.

    e_x (lx x n), d_x = e_x.T, e_y (ly x q), d_y = e_y.T; m_fwd (ly x lx) maps
    parameter latents to observation latents and m_bwd (lx x ly) maps back.
    spectrum_x / spectrum_y hold the retained singular values of the moment
    square roots (strictly positive, descending).
    """

    e_x: np.ndarray
    d_x: np.ndarray
    e_y: np.ndarray
    d_y: np.ndarray
    m_fwd: np.ndarray
    m_bwd: np.ndarray
    spectrum_x: np.ndarray
    spectrum_y: np.ndarray

    @property
    def latent_x(self) -> int:
        return self.e_x.shape[0]

    @property
    def latent_y(self) -> int:
        return self.e_y.shape[0]

    # The same normalized-coordinate surface PairModel exposes; for the linear
    # construction physical and normalized coordinates coincide.
    def norm_x(self, x):
        return np.asarray(x, dtype=float)

    def denorm_x(self, x):
        return np.asarray(x, dtype=float)

    def norm_y(self, y):
        return np.asarray(y, dtype=float)

    def denorm_y(self, y):
        return np.asarray(y, dtype=float)

    def encode_x(self, x):
        return x @ self.e_x.T

    def decode_x(self, z):
        return z @ self.d_x.T

    def encode_y(self, y):
        return y @ self.e_y.T

    def decode_y(self, z):
        return z @ self.d_y.T

    def map_fwd(self, z):
        return z @ self.m_fwd.T

    def map_bwd(self, z):
        return z @ self.m_bwd.T


def _moment_factors(gamma: np.ndarray, latent: int, name: str):
    """Leading eigenvector block and sqrt-eigenvalues of an SPD moment."""
    dec = sym_eig(gamma)
    lam_max = dec.values[0]
    if lam_max <= 0 or dec.values[-1] <= SPD_TOL * lam_max:
        raise ValueError(
            f"{name} moment is not SPD: smallest eigenvalue {dec.values[-1]:.6e}"
        )
    rank = int(np.sum(dec.values > SPD_TOL * lam_max))
    if latent > rank:
        raise ValueError(
            f"latent dimension {latent} exceeds numerical rank {rank} of the {name} moment"
        )
    return dec.vectors[:, :latent], np.sqrt(dec.values[:latent])


def optimal_linear_pair(
    a: np.ndarray,
    cov_x: np.ndarray,
    cov_noise: np.ndarray,
    latent_x: int,
    latent_y: int,
) -> LinearPair:
    """Closed-form optimal linear pair for y = A x + eps with the given moments."""
    a = np.asarray(a, dtype=float)
    q, n = a.shape
    if not 1 <= latent_x <= n or not 1 <= latent_y <= q:
        raise ValueError("latent dimensions must satisfy 1 <= l_x <= n, 1 <= l_y <= q")
    u_x, s_x = _moment_factors(np.asarray(cov_x, dtype=float), latent_x, "parameter")
    gamma_y = a @ cov_x @ a.T + np.asarray(cov_noise, dtype=float)
    u_y, s_y = _moment_factors(gamma_y, latent_y, "observation")
    m_fwd = u_y.T @ a @ u_x
    # Reciprocal spectrum floored relative to its largest entry: the moments
    # are SPD by contract but finite-sample estimates can be nearly singular.
    s_y2 = np.maximum(s_y**2, SPECTRUM_FLOOR * np.max(s_y**2))
    m_bwd = (s_x**2)[:, None] * (u_x.T @ a.T @ u_y) / s_y2[None, :]
    return LinearPair(
        e_x=u_x.T,
        d_x=u_x,
        e_y=u_y.T,
        d_y=u_y,
        m_fwd=m_fwd,
        m_bwd=m_bwd,
        spectrum_x=s_x,
        spectrum_y=s_y,
    )


def second_moment(samples: np.ndarray, loading: float = 1e-8) -> np.ndarray:
    """Centered second moment of a sample matrix with diagonal loading.

    Loading is loading * trace/n on the diagonal, keeping the estimate SPD
    when the sample count is below the dimension.
    """
    samples = np.asarray(samples, dtype=float)
    centered = samples - samples.mean(axis=0)
    gamma = centered.T @ centered / samples.shape[0]
    n = gamma.shape[0]
    return gamma + (loading * np.trace(gamma) / n) * np.eye(n)


def pair_inverse_linear(pair: LinearPair, y: np.ndarray) -> np.ndarray:
    """Direct surrogate inversion d_x(m_bwd(e_y(y))) without any optimization."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != pair.e_y.shape[1]:
        raise ValueError(f"observation length {y.shape[-1]} != {pair.e_y.shape[1]}")
    return pair.decode_x(pair.map_bwd(pair.encode_y(y)))


def closed_form_lsi_zy(pair: LinearPair, mask: MaskOperator, y_sub: np.ndarray):
    """Observation-latent least squares by pseudoinverse: z = (P d_y)^+ y_sub.

    y_sub must already be masked. Returns (z_hat, x_hat) with
    x_hat = d_x(m_bwd(z_hat)).
    """
    y_sub = _check_masked(mask, y_sub)
    z_hat = pinv(mask.keep[:, None] * pair.d_y) @ y_sub
    return z_hat, pair.decode_x(pair.map_bwd(z_hat))


def closed_form_lsi_zx(pair: LinearPair, mask: MaskOperator, y_sub: np.ndarray):
    """Parameter-latent least squares: z = (P d_y m_fwd)^+ y_sub, x_hat = d_x z."""
    y_sub = _check_masked(mask, y_sub)
    z_hat = pinv(mask.keep[:, None] * (pair.d_y @ pair.m_fwd)) @ y_sub
    return z_hat, pair.decode_x(z_hat)


def _check_masked(mask: MaskOperator, y_sub: np.ndarray) -> np.ndarray:
    y_sub = np.asarray(y_sub, dtype=float)
    if not np.array_equal(apply_mask(mask, y_sub), y_sub):
        raise ValueError("y_sub has nonzero entries on the masked index set")
    return y_sub


def mmse_oracle(a, cov_x, cov_noise, y: np.ndarray) -> np.ndarray:
    """Gaussian MMSE estimate cov_x A^T (A cov_x A^T + cov_noise)^-1 y.

    Computed by a dense solve with no pair construction, serving as the
    independent oracle for the full-rank identity-mask reconstruction.
    """
    a = np.asarray(a, dtype=float)
    gamma_y = a @ cov_x @ a.T + np.asarray(cov_noise, dtype=float)
    try:
        w = np.linalg.solve(gamma_y, np.asarray(y, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"observation moment is singular: {exc}") from exc
    return cov_x @ (a.T @ w)


def save_linear_pair(pair: LinearPair, path) -> None:
    obj = {
        "latent_x": pair.latent_x,
        "latent_y": pair.latent_y,
        "n": pair.e_x.shape[1],
        "q": pair.e_y.shape[1],
        "e_x": pair.e_x.ravel().tolist(),
        "e_y": pair.e_y.ravel().tolist(),
        "m_fwd": pair.m_fwd.ravel().tolist(),
        "m_bwd": pair.m_bwd.ravel().tolist(),
        "spectrum_x": pair.spectrum_x.tolist(),
        "spectrum_y": pair.spectrum_y.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_linear_pair(path) -> LinearPair:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    lx, ly, n, q = obj["latent_x"], obj["latent_y"], obj["n"], obj["q"]
    e_x = np.array(obj["e_x"]).reshape(lx, n)
    e_y = np.array(obj["e_y"]).reshape(ly, q)
    return LinearPair(
        e_x=e_x,
        d_x=e_x.T.copy(),
        e_y=e_y,
        d_y=e_y.T.copy(),
        m_fwd=np.array(obj["m_fwd"]).reshape(ly, lx),
        m_bwd=np.array(obj["m_bwd"]).reshape(lx, ly),
        spectrum_x=np.array(obj["spectrum_x"]),
        spectrum_y=np.array(obj["spectrum_y"]),
    )
