"""Uniform-bin histogram container for time and time-difference data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Histogram:
    """Counts over uniform bins, with overflow tracked separately.

    bin_edges has len(counts) + 1 strictly increasing, uniformly spaced
    entries; sum(counts) + overflow == total.  Counts are integer-valued
    when built from events; synthetic (noise-free) histograms may carry
    real-valued counts.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    overflow: int
    total: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        if edges.ndim != 1 or edges.size < 2:
            raise ParameterError("bin_edges must be a 1-D array of >= 2 edges")
        if counts.shape != (edges.size - 1,):
            raise ParameterError("counts must have one entry per bin")
        widths = np.diff(edges)
        if np.any(widths <= 0.0):
            raise ParameterError("bin edges must be strictly increasing")
        if np.max(widths) - np.min(widths) > 1e-12 * np.max(widths):
            raise ParameterError("bins must be uniform to 1e-12 relative")
        if np.any(counts < 0):
            raise ParameterError("counts must be nonnegative")
        if self.overflow < 0:
            raise ParameterError("overflow must be nonnegative")
        if abs(float(np.sum(counts)) + self.overflow - self.total) > 1e-9 * max(
            1.0, abs(self.total)
        ):
            raise ParameterError("sum(counts) + overflow must equal total")

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])
