"""Synthetic inverse-problem generation: parallel-beam tomography, phantoms,
Gaussian model sampling, and exact-fraction noise injection.

Sinogram layout convention used throughout the package: the flat observation
vector is angle-major, entry index = angle_index * detector_count + detector
index. Viewed as a matrix it is (detector_count x angle_count) with one angle
per column, which is the shape the masking operators work on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import cov_sqrt


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-sample stream: independent of generation order."""
    return np.random.Generator(np.random.Philox(key=[seed % 2**64, index % 2**64]))


@dataclass(frozen=True)
class TomoGeometry:
    grid_side: int
    angle_count: int
    angles_deg: tuple
    detector_count: int
    detector_spacing: float


@dataclass(frozen=True)
class ForwardOperator:
    """Dense ray-intersection matrix (q x n) plus its acquisition geometry."""

    matrix: np.ndarray
    geometry: TomoGeometry

    @property
    def q(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T if x.ndim == 2 else self.matrix @ x


def radon_matrix(
    grid_side: int,
    angles_deg,
    detector_count: int,
    detector_spacing: float = 1.0,
) -> np.ndarray:
    """Exact ray-pixel intersection lengths for a parallel-beam geometry.

    The image is grid_side x grid_side unit pixels centered at the origin.
    The ray for (angle theta, detector offset t) is the line
    {p : p . (cos t, sin t) = offset}; each matrix entry is the length of that
    line's intersection with one pixel, so rows of the result applied to a
    row-major flattened image integrate it along the rays.
    """
    g = int(grid_side)
    half = g / 2.0
    edges = np.arange(g + 1, dtype=float) - half
    offsets = (np.arange(detector_count, dtype=float) - (detector_count - 1) / 2.0)
    offsets *= detector_spacing
    rows = []
    for theta_deg in angles_deg:
        theta = np.deg2rad(float(theta_deg))
        c, s = np.cos(theta), np.sin(theta)
        # snap axis-aligned rays exactly so 0/90/180 degrees bin consistently
        if abs(s) < 1e-14:
            s, c = 0.0, np.sign(c)
        elif abs(c) < 1e-14:
            c, s = 0.0, np.sign(s)
        for t in offsets:
            params = []
            if abs(s) > 1e-12:  # crossings with vertical grid lines x = edge
                params.append((t * c - edges) / s)
            if abs(c) > 1e-12:  # crossings with horizontal grid lines y = edge
                params.append((edges - t * s) / c)
            sv = np.sort(np.concatenate(params))
            lengths = np.diff(sv)
            mids = 0.5 * (sv[:-1] + sv[1:])
            px = t * c - mids * s
            py = t * s + mids * c
            cols_idx = np.floor(px + half).astype(int)
            rows_idx = np.floor(half - py).astype(int)
            ok = (
                (lengths > 1e-12)
                & (cols_idx >= 0)
                & (cols_idx < g)
                & (rows_idx >= 0)
                & (rows_idx < g)
            )
            row = np.zeros(g * g)
            np.add.at(row, rows_idx[ok] * g + cols_idx[ok], lengths[ok])
            rows.append(row)
    return np.array(rows)


def build_radon(
    grid_side: int,
    angle_count: int,
    detector_count: int,
    detector_spacing: float = 1.0,
) -> ForwardOperator:
    """Parallel-beam operator with angles uniformly spaced over [0, 180)."""
    if min(grid_side, angle_count, detector_count) < 1:
        raise ValueError("grid_side, angle_count and detector_count must be >= 1")
    angles = tuple(180.0 * i / angle_count for i in range(angle_count))
    matrix = radon_matrix(grid_side, angles, detector_count, detector_spacing)
    geometry = TomoGeometry(
        grid_side=grid_side,
        angle_count=angle_count,
        angles_deg=angles,
        detector_count=detector_count,
        detector_spacing=detector_spacing,
    )
    return ForwardOperator(matrix=matrix, geometry=geometry)


def generate_phantoms(
    grid_side: int,
    count: int,
    seed: int,
    ellipse_count: tuple = (2, 6),
    intensity: tuple = (0.2, 0.6),
) -> np.ndarray:
    """Random-ellipse phantom images in [0, 1], flattened row-major.

    Each sample overlays 2-6 ellipses (centers in the inner 80% of the grid,
    semi-axes 10-35% of the side, uniform rotation, additive intensities)
    and clips to [0, 1]. The count and intensity ranges are exposed so a
    shifted out-of-distribution corpus can be drawn from the same generator.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    g = int(grid_side)
    rr, cc = np.meshgrid(np.arange(g) + 0.5, np.arange(g) + 0.5, indexing="ij")
    out = np.empty((count, g * g))
    for i in range(count):
        rng = sample_rng(seed, i)
        img = np.zeros((g, g))
        n_ell = int(rng.integers(ellipse_count[0], ellipse_count[1] + 1))
        for _ in range(n_ell):
            cy = rng.uniform(0.1 * g, 0.9 * g)
            cx = rng.uniform(0.1 * g, 0.9 * g)
            a = rng.uniform(0.10 * g, 0.35 * g)
            b = rng.uniform(0.10 * g, 0.35 * g)
            phi = rng.uniform(0.0, np.pi)
            level = rng.uniform(intensity[0], intensity[1])
            dy, dx = rr - cy, cc - cx
            u = dx * np.cos(phi) + dy * np.sin(phi)
            v = -dx * np.sin(phi) + dy * np.cos(phi)
            img += level * (((u / a) ** 2 + (v / b) ** 2) <= 1.0)
        out[i] = np.clip(img, 0.0, 1.0).ravel()
    return out


@dataclass(frozen=True)
class GaussianModelSpec:
    """Gaussian prior: mean, SPD parameter second moment, SPD noise moment."""

    mean: np.ndarray
    cov_x: np.ndarray
    cov_noise: np.ndarray


def sample_gaussian_models(spec: GaussianModelSpec, count: int, seed: int) -> np.ndarray:
    """Draw count samples x = mean + L w with L the eigen square root of cov_x."""
    factor = cov_sqrt(spec.cov_x)
    n = len(spec.mean)
    out = np.empty((count, n))
    for i in range(count):
        w = sample_rng(seed, i).standard_normal(n)
        out[i] = spec.mean + factor @ w
    return out


def simulate_observations(a, x: np.ndarray, noise_fraction: float, seed: int) -> np.ndarray:
    """Noisy projections y = A x + eps with ||eps|| = noise_fraction * ||A x|| exactly.

    `a` may be a ForwardOperator or a plain (q x n) matrix; `x` one sample (n,)
    or a batch (count, n).
    """
    if noise_fraction < 0:
        raise ValueError("noise_fraction must be >= 0")
    matrix = a.matrix if isinstance(a, ForwardOperator) else np.asarray(a, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    y = xb @ matrix.T
    if noise_fraction > 0:
        for i in range(y.shape[0]):
            eps = sample_rng(seed, i).standard_normal(y.shape[1])
            eps_norm = np.linalg.norm(eps)
            if eps_norm > 0:
                y[i] += eps * (noise_fraction * np.linalg.norm(y[i]) / eps_norm)
    return y[0] if single else y
