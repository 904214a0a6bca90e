"""Masking operators modeling missing or corrupted observations.

Masks zero entries rather than deleting them, so every operator maps the
observation space to itself: encoders, LSI objectives and the bi-Lipschitz
certificates can all share one operator, and restriction to the observed
entries is recovered because both sides of a masked residual are zeroed
identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("identity", "random-columns", "block-columns", "random-entries")


@dataclass(frozen=True)
class MaskOperator:
    """Deterministic, idempotent zeroing pattern over flat observations.

    For the column kinds, `shape` is (detector_count, angle_count) and one
    column means one angle; flat indices follow the angle-major layout of
    forward.radon_matrix. `zero_idx` is the sorted set of zeroed flat entries.
    """

    kind: str
    shape: tuple
    length: int
    fraction: float
    seed: int
    zero_idx: np.ndarray
    zero_columns: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    @property
    def keep(self) -> np.ndarray:
        """Indicator vector: 1 on observed entries, 0 on zeroed ones."""
        keep = np.ones(self.length)
        keep[self.zero_idx] = 0.0
        return keep

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return apply_mask(self, y)


def make_mask(kind: str, shape, fraction: float, seed: int) -> MaskOperator:
    """Build a mask of the given kind over an observation shape.

    `shape` is (detector_count, angle_count) or a flat length q. Column kinds
    require the 2-D form. The zeroed set is a fixed function of (kind, shape,
    fraction, seed).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown mask kind {kind!r}; expected one of {KINDS}")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    if isinstance(shape, (int, np.integer)):
        det_count, angle_count = int(shape), 1
        shape_t = (int(shape), 1)
    else:
        det_count, angle_count = int(shape[0]), int(shape[1])
        shape_t = (det_count, angle_count)
    q = det_count * angle_count
    rng = np.random.Generator(np.random.Philox(key=[seed % 2**64, 0]))
    zero_cols = np.array([], dtype=int)
    if kind == "identity":
        zero_idx = np.array([], dtype=int)
    elif kind == "random-columns":
        k = int(np.round(fraction * angle_count))
        zero_cols = np.sort(rng.choice(angle_count, size=k, replace=False))
        zero_idx = _column_entries(zero_cols, det_count)
    elif kind == "block-columns":
        k = int(np.round(fraction * angle_count))
        start = int(rng.integers(0, angle_count - k + 1)) if k < angle_count else 0
        zero_cols = np.arange(start, start + k)
        zero_idx = _column_entries(zero_cols, det_count)
    else:  # random-entries
        k = int(np.round(fraction * q))
        zero_idx = np.sort(rng.choice(q, size=k, replace=False))
    return MaskOperator(
        kind=kind,
        shape=shape_t,
        length=q,
        fraction=float(fraction),
        seed=int(seed),
        zero_idx=np.asarray(zero_idx, dtype=int),
        zero_columns=zero_cols,
    )


def _column_entries(columns: np.ndarray, det_count: int) -> np.ndarray:
    # angle-major flat layout: column (angle) j occupies j*det_count ... +det_count-1
    if len(columns) == 0:
        return np.array([], dtype=int)
    return np.sort(
        (columns[:, None] * det_count + np.arange(det_count)[None, :]).ravel()
    )


def apply_mask(mask: MaskOperator, y: np.ndarray) -> np.ndarray:
    """Zero the masked entries of y (1-D) or of each row of y (2-D)."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != mask.length:
        raise ValueError(
            f"observation length {y.shape[-1]} does not match mask length {mask.length}"
        )
    out = y.copy()
    out[..., mask.zero_idx] = 0.0
    return out
