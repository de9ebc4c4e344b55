"""Similarity histograms over [0, 1].

Two constructions share one binning convention (b half-open bins of width
1/b tiling [0, 1], last bin closed):

* :func:`indicator_histogram` counts samples per bin. Exact but
  non-differentiable; kept as the oracle.
* :func:`gaussian_histogram` replaces the indicator with a Gaussian
  kernel integrated over the bin width, evaluated at the bin centers.
  Differentiable in every input similarity; converges to the indicator
  histogram as sigma shrinks.

Similarities come from :func:`scaled_cosine_similarity`, which maps
cosine similarity from [-1, 1] onto [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import Tensor, as_tensor, stack

__all__ = [
    "SimilarityHistogram",
    "scaled_cosine_similarity",
    "pairwise_scaled_cosine",
    "cross_scaled_cosine",
    "indicator_histogram",
    "gaussian_histogram",
    "total_variation",
]

SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@dataclass
class SimilarityHistogram:
    """Discretized density over [lo, hi] with `bins` equal-width bins."""

    bins: int
    values: object  # np.ndarray or diffcore.Tensor, length `bins`
    normalized: bool
    lo: float = 0.0
    hi: float = 1.0

    @property
    def delta(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.bins) + 0.5) * self.delta

    def values_array(self) -> np.ndarray:
        v = self.values
        return v.data if isinstance(v, Tensor) else np.asarray(v, dtype=np.float64)

    def normalized_values(self) -> np.ndarray:
        v = self.values_array()
        return v / v.sum()

    def to_csv_rows(self) -> list[tuple[float, float]]:
        """(bin_center, value) rows for plotting exports."""
        return [(float(c), float(v)) for c, v in zip(self.centers, self.values_array())]


def _norms(x: Tensor, axis=None) -> Tensor:
    return (x * x).sum(axis=axis).sqrt()


def scaled_cosine_similarity(x, y) -> Tensor:
    """0.5 * (cos(x, y) + 1) for two nonzero vectors, in [0, 1]."""
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape or x.data.ndim != 1:
        raise ValueError(f"expected two equal-length vectors, got {x.shape} and {y.shape}")
    nx, ny = _norms(x), _norms(y)
    if nx.item() == 0.0 or ny.item() == 0.0:
        raise ValueError("cosine similarity undefined for a zero-norm vector")
    return ((x * y).sum() / (nx * ny) + 1.0) * 0.5


def pairwise_scaled_cosine(x: Tensor, y: Tensor) -> Tensor:
    """Row-wise scaled cosine of two (N, D) matrices -> (N,) vector."""
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape or x.data.ndim != 2:
        raise ValueError(f"expected two equal-shape (N, D) matrices, got {x.shape} and {y.shape}")
    nx, ny = _norms(x, axis=1), _norms(y, axis=1)
    if np.any(nx.data == 0.0) or np.any(ny.data == 0.0):
        raise ValueError("cosine similarity undefined for a zero-norm row")
    return ((x * y).sum(axis=1) / (nx * ny) + 1.0) * 0.5


def cross_scaled_cosine(x: Tensor, y: Tensor) -> Tensor:
    """Scaled cosine between every row of x and every row of y, flattened."""
    x, y = as_tensor(x), as_tensor(y)
    if x.data.ndim != 2 or y.data.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError(f"expected (N, D) and (M, D) matrices, got {x.shape} and {y.shape}")
    nx = _norms(x, axis=1).reshape(x.shape[0], 1)
    ny = _norms(y, axis=1).reshape(y.shape[0], 1)
    if np.any(nx.data == 0.0) or np.any(ny.data == 0.0):
        raise ValueError("cosine similarity undefined for a zero-norm row")
    cos = (x / nx) @ _transpose(y / ny)
    return (cos.reshape(x.shape[0] * y.shape[0]) + 1.0) * 0.5


def _transpose(t: Tensor) -> Tensor:
    def backward(g):
        return (np.asarray(g).T,)
    return Tensor._result(t.data.T, (t,), backward, "transpose")


def _bin_index(sims: np.ndarray, bins: int) -> np.ndarray:
    # floor(s * b), with s = 1 folded into the last bin.
    return np.minimum(np.floor(sims * bins).astype(int), bins - 1)


def indicator_histogram(sims, bins: int) -> SimilarityHistogram:
    """Exact per-bin counts of similarities in [0, 1] (non-differentiable)."""
    sims = np.asarray(sims, dtype=np.float64).reshape(-1)
    if bins < 1:
        raise ValueError("bin count must be >= 1")
    if sims.size and (sims.min() < 0.0 or sims.max() > 1.0):
        raise ValueError("similarities must lie in [0, 1]")
    counts = np.bincount(_bin_index(sims, bins), minlength=bins).astype(np.float64)
    return SimilarityHistogram(bins=bins, values=counts, normalized=False)


def gaussian_histogram(sims, bins: int, sigma: float = 0.1,
                       normalized: bool = True) -> SimilarityHistogram:
    """Differentiable soft histogram via Gaussian kernels at the bin centers.

    Each similarity contributes a Gaussian density evaluated at every bin
    center, scaled by the bin width; with `normalized` the result is
    divided by its total mass so it is a distribution. Gradient flows to
    every input similarity.
    """
    if bins < 1:
        raise ValueError("bin count must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if isinstance(sims, (list, tuple)):
        sims = stack(sims)
    sims = as_tensor(sims)
    n = sims.size
    delta = 1.0 / bins
    centers = (np.arange(bins) + 0.5) * delta
    z = sims.reshape(n, 1) - centers
    scale = delta / (sigma * SQRT_2PI)
    kernel = ((z * z) * (-1.0 / (2.0 * sigma * sigma))).exp() * scale
    values = kernel.sum(axis=0)
    if normalized:
        values = values / values.sum()
    return SimilarityHistogram(bins=bins, values=values, normalized=normalized)


def total_variation(a: SimilarityHistogram, b: SimilarityHistogram) -> float:
    """TV distance between two histograms after normalizing each to mass 1."""
    if a.bins != b.bins:
        raise ValueError("histograms must share a bin count")
    return 0.5 * float(np.abs(a.normalized_values() - b.normalized_values()).sum())
