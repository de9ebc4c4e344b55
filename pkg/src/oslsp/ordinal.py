"""Ordinal class similarity and the ground-truth similarity distribution.

Classes 1..K sit on an ordinal scale; similarity between classes k and k'
is 1 - |k'-k|/(K-1), so identical classes score 1 and the two extremes
score 0. Combining the class proportions of two bags yields a discrete
probability distribution over the K possible similarity values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "class_similarity",
    "similarity_values",
    "similarity_matrix",
    "GroundTruthSimPDF",
    "ground_truth_pdf",
    "validate_proportions",
]

PROPORTION_TOL = 1e-9


def class_similarity(k: int, k_prime: int, num_classes: int) -> float:
    """Similarity of ordinal classes k and k' (1-based), in [0, 1]."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if not (1 <= k <= num_classes) or not (1 <= k_prime <= num_classes):
        raise ValueError(f"class index out of range 1..{num_classes}: ({k}, {k_prime})")
    return 1.0 - abs(k_prime - k) / (num_classes - 1)


def similarity_values(num_classes: int) -> np.ndarray:
    """The K distinct similarity values 1 - m/(K-1), m = 0..K-1 (descending)."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    return 1.0 - np.arange(num_classes) / (num_classes - 1)


def similarity_matrix(num_classes: int) -> np.ndarray:
    """K x K matrix of pairwise class similarities (symmetric, unit diagonal)."""
    idx = np.arange(num_classes)
    return 1.0 - np.abs(idx[:, None] - idx[None, :]) / (num_classes - 1)


def validate_proportions(p, num_classes: int | None = None) -> np.ndarray:
    """Check a class-proportion vector: entries in [0,1], L1 norm 1."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("proportion vector must be 1-D")
    if num_classes is not None and p.shape[0] != num_classes:
        raise ValueError(f"expected {num_classes} classes, got {p.shape[0]}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("proportions must lie in [0, 1]")
    if abs(p.sum() - 1.0) > PROPORTION_TOL:
        raise ValueError(f"proportions must sum to 1, got {p.sum()!r}")
    return p


@dataclass(frozen=True)
class GroundTruthSimPDF:
    """Discrete distribution over the K similarity values.

    ``masses[m]`` is the probability of similarity ``values[m]`` where
    ``values[m] = 1 - m/(K-1)``; class pairs with equal |k-k'| share one
    atom, so the masses sum to 1.
    """

    values: np.ndarray  # descending, values[0] = 1, values[-1] = 0
    masses: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.values.shape[0]

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def atoms(self) -> dict[float, float]:
        return {float(s): float(m) for s, m in zip(self.values, self.masses)}


def ground_truth_pdf(p, p_prime) -> GroundTruthSimPDF:
    """Distribution of class similarity when drawing one class per bag.

    For class pair (k, k') the diagonal contributes p_k * p'_k to the atom
    at similarity 1, and each unordered off-diagonal pair contributes
    p_k * p'_k' + p_k' * p'_k to the atom at its shared similarity value.
    """
    p = validate_proportions(p)
    p_prime = validate_proportions(p_prime, num_classes=p.shape[0])
    k = p.shape[0]
    masses = np.zeros(k)
    masses[0] = float(np.dot(p, p_prime))
    for m in range(1, k):
        masses[m] = float(np.dot(p[:-m], p_prime[m:]) + np.dot(p[m:], p_prime[:-m]))
    return GroundTruthSimPDF(values=similarity_values(k), masses=masses)
