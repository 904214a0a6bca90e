"""Dataset container: paired parameter/observation samples on disk.

File format: 8-byte magic "PAIRDS1\\n", one UTF-8 JSON header line
{count, n, q, shapes, normalization, provenance}, then X as count*n
little-endian float64, then Y as count*q little-endian float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"PAIRDS1\n"


class DatasetFormatError(ValueError):
    """The container file is malformed or truncated."""


@dataclass(frozen=True)
class Normalization:
    """Global scalar mean/std per space, computed over the training split."""

    x_mean: float
    x_std: float
    y_mean: float
    y_std: float

    def to_dict(self) -> dict:
        return {
            "x_mean": self.x_mean,
            "x_std": self.x_std,
            "y_mean": self.y_mean,
            "y_std": self.y_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(
            x_mean=float(d["x_mean"]),
            x_std=float(d["x_std"]),
            y_mean=float(d["y_mean"]),
            y_std=float(d["y_std"]),
        )


def compute_normalization(x: np.ndarray, y: np.ndarray) -> Normalization:
    """Mean-shift and standard-deviation scaling constants over all entries."""
    x_std = float(np.std(x))
    y_std = float(np.std(y))
    if x_std <= 0 or y_std <= 0:
        raise ValueError("degenerate split: zero standard deviation")
    return Normalization(
        x_mean=float(np.mean(x)), x_std=x_std, y_mean=float(np.mean(y)), y_std=y_std
    )


@dataclass
class Dataset:
    """Paired samples X (count x n) and Y (count x q) plus metadata."""

    x: np.ndarray
    y: np.ndarray
    normalization: Normalization
    shapes: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.x.shape[0]

    def norm_x(self, x: np.ndarray) -> np.ndarray:
        return (x - self.normalization.x_mean) / self.normalization.x_std

    def norm_y(self, y: np.ndarray) -> np.ndarray:
        return (y - self.normalization.y_mean) / self.normalization.y_std


def save_dataset(ds: Dataset, path) -> None:
    if ds.x.shape[0] != ds.y.shape[0]:
        raise ValueError("X and Y sample counts differ")
    header = {
        "count": int(ds.x.shape[0]),
        "n": int(ds.x.shape[1]),
        "q": int(ds.y.shape[1]),
        "shapes": ds.shapes,
        "normalization": ds.normalization.to_dict(),
        "provenance": ds.provenance,
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(ds.x, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.y, dtype="<f8").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DatasetFormatError(f"{path}: bad magic {magic!r}")
        header_bytes = bytearray()
        while True:
            ch = fh.read(1)
            if not ch:
                raise DatasetFormatError(f"{path}: truncated header")
            if ch == b"\n":
                break
            header_bytes.extend(ch)
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DatasetFormatError(f"{path}: bad header: {exc}") from exc
        count, n, q = header["count"], header["n"], header["q"]
        xb = fh.read(count * n * 8)
        yb = fh.read(count * q * 8)
        if len(xb) != count * n * 8 or len(yb) != count * q * 8:
            raise DatasetFormatError(f"{path}: truncated payload")
        x = np.frombuffer(xb, dtype="<f8").reshape(count, n).copy()
        y = np.frombuffer(yb, dtype="<f8").reshape(count, q).copy()
    return Dataset(
        x=x,
        y=y,
        normalization=Normalization.from_dict(header["normalization"]),
        shapes=header.get("shapes", {}),
        provenance=header.get("provenance", {}),
    )
