"""Empirical CDF over distance samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EmptySample


@dataclass(frozen=True)
class Ecdf:
    values: np.ndarray  # sorted samples

    def __len__(self) -> int:
        return len(self.values)

    def __call__(self, x):
        """Right-continuous step function ``#{v <= x} / n``."""
        f = np.searchsorted(self.values, x, side="right") / len(self.values)
        return f[()] if np.ndim(f) == 0 else f

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct sample values and the CDF level reached at each."""
        xs, counts = np.unique(self.values, return_counts=True)
        return xs, np.cumsum(counts) / len(self.values)

    def quantile(self, q):
        """Smallest sample ``x`` with ``F(x) >= q``."""
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)):
            raise ValueError("quantile level outside [0, 1]")
        n = len(self.values)
        idx = np.clip(np.ceil(q * n).astype(int) - 1, 0, n - 1)
        out = self.values[idx]
        return out[()] if out.ndim == 0 else out


def ecdf_build(values: Iterable[float] | np.ndarray) -> Ecdf:
    arr = np.asarray(values if isinstance(values, np.ndarray) else list(values), dtype=float).ravel()
    if arr.size == 0:
        raise EmptySample("cannot build an ECDF from no samples")
    if not np.all(np.isfinite(arr)):
        raise ValueError("ECDF samples must be finite")
    return Ecdf(np.sort(arr, kind="stable"))


def write_ecdf_csv(ecdf: Ecdf | None, stream) -> None:
    stream.write("distance_m,fraction\n")
    if ecdf is None:
        return
    xs, fs = ecdf.steps()
    for x, f in zip(xs.tolist(), fs.tolist()):
        stream.write(f"{x:.4f},{f:.6f}\n")
