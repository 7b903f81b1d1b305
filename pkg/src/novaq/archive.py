"""Visitation-count grid over the metric space."""
from __future__ import annotations

from typing import Sequence

import numpy as np


class GridArchive:
    """N x N x N visitation counts over (magnitude, phase, entanglement).

    Each dimension is split into N equal half-open intervals of its bounds;
    a value equal to the upper bound falls in the last bin. Values outside
    the bounds are clamped and counted in ``out_of_range``.
    """

    def __init__(self, bins_per_dim: int = 10, bounds: Sequence[tuple[float, float]] | None = None):
        if bins_per_dim < 1:
            raise ValueError("bins_per_dim must be positive")
        self.bins_per_dim = int(bins_per_dim)
        if bounds is None:
            bounds = [(0.0, 1.0)] * 3
        bounds = np.asarray(bounds, dtype=np.float64)
        if bounds.shape != (3, 2) or np.any(bounds[:, 1] <= bounds[:, 0]):
            raise ValueError("bounds must be three (lower, upper) pairs with lower < upper")
        self.bounds = bounds
        steps = np.arange(self.bins_per_dim + 1)
        self._edges = [lo + (hi - lo) * steps / self.bins_per_dim for lo, hi in bounds]
        self.counts = np.zeros((self.bins_per_dim,) * 3, dtype=np.int64)
        self.total_recorded = 0
        self.out_of_range = 0

    @property
    def n_cells(self) -> int:
        return self.bins_per_dim**3

    def cell_indices(self, metrics: np.ndarray, flag: bool = False) -> np.ndarray:
        """Cell index rows (eta_m, eta_p, eta_e) for a (B, 3) metric array."""
        m = np.atleast_2d(np.asarray(metrics, dtype=np.float64))
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if flag:
            self.out_of_range += int(np.any((m < lo) | (m > hi), axis=1).sum())
        m = np.clip(m, lo, hi)
        # floor((m - lo) / (hi - lo) * N), evaluated against the bin edges so no
        # value is shifted across a boundary by rounding of the product
        idx = np.empty(m.shape, dtype=np.int64)
        for d in range(3):
            idx[:, d] = np.searchsorted(self._edges[d], m[:, d], side="right") - 1
        return np.minimum(idx, self.bins_per_dim - 1)

    def cell_index(self, m: Sequence[float]) -> tuple[int, int, int]:
        return tuple(int(v) for v in self.cell_indices(m)[0])

    def record(self, m: Sequence[float]) -> "GridArchive":
        self.record_many(np.atleast_2d(m))
        return self

    def record_many(self, metrics: np.ndarray) -> np.ndarray:
        idx = self.cell_indices(metrics, flag=True)
        np.add.at(self.counts, (idx[:, 0], idx[:, 1], idx[:, 2]), 1)
        self.total_recorded += idx.shape[0]
        return idx

    def novelty_scores(self, metrics: np.ndarray) -> np.ndarray:
        """Relative visitation frequency rho / N^3 of each row's cell; lower is more novel.

        For N = 10 the product score * N^3 reproduces the integer count exactly
        up to 1000 visits of one cell; beyond that compare ``counts`` directly.
        """
        idx = self.cell_indices(metrics)
        return self.counts[idx[:, 0], idx[:, 1], idx[:, 2]] / self.n_cells

    def novelty_score(self, m: Sequence[float]) -> float:
        return float(self.novelty_scores(m)[0])

    def coverage(self) -> tuple[int, float]:
        occupied = int(np.count_nonzero(self.counts))
        return occupied, occupied / self.n_cells

    def marginal_occupancy(self) -> dict[str, int]:
        """Occupied bins of each 1-D marginal."""
        occ = self.counts > 0
        return {
            "magnitude": int(occ.any(axis=(1, 2)).sum()),
            "phase": int(occ.any(axis=(0, 2)).sum()),
            "entanglement": int(occ.any(axis=(0, 1)).sum()),
        }

    def projections(self) -> dict[str, np.ndarray]:
        """2-D count projections onto each pair of dimensions."""
        return {
            "magnitude_phase": self.counts.sum(axis=2),
            "magnitude_entanglement": self.counts.sum(axis=1),
            "phase_entanglement": self.counts.sum(axis=0),
        }

    def snapshot(self) -> "GridArchive":
        other = GridArchive(self.bins_per_dim, self.bounds)
        other.counts = self.counts.copy()
        other.total_recorded = self.total_recorded
        return other

    def to_flat(self) -> list[int]:
        """Counts in row-major (eta_m, eta_p, eta_e) order."""
        return [int(c) for c in self.counts.ravel()]

    @classmethod
    def from_flat(cls, flat: Sequence[int], bins_per_dim: int = 10) -> "GridArchive":
        archive = cls(bins_per_dim)
        archive.counts = np.asarray(flat, dtype=np.int64).reshape((bins_per_dim,) * 3)
        archive.total_recorded = int(archive.counts.sum())
        return archive
