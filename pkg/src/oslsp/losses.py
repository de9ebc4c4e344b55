"""KL-divergence losses for bag-level weak supervision.

* :func:`sim_prop_loss` — KL(predicted similarity histogram || target
  histogram implied by two bags' class proportions). Differentiable in
  every instance feature, so it trains the feature extractor.
* :func:`prop_loss` — KL(true class proportions || aggregated predicted
  proportions), the classic label-proportion loss for the classifier head.

Natural logarithm throughout. Inside each KL the denominator is floored
at `eps` and renormalized; the floor keeps logs finite when a target bin
is empty and the renormalization preserves the Gibbs lower bound (loss
>= 0 up to rounding) even on adversarial inputs.
"""

from __future__ import annotations

import numpy as np

from .diffcore import Tensor, as_tensor
from .ordinal import GroundTruthSimPDF, ground_truth_pdf, validate_proportions
from .simhist import SQRT_2PI, SimilarityHistogram, _bin_index, \
    cross_scaled_cosine, gaussian_histogram, pairwise_scaled_cosine

__all__ = [
    "KL_EPS",
    "kl_divergence",
    "discretize_ground_truth",
    "sim_prop_loss",
    "aggregate_predictions",
    "prop_loss",
]

KL_EPS = 1e-8
_GT_FLOOR = 1e-12


def kl_divergence(p, q, eps: float = KL_EPS) -> Tensor:
    """D_KL(p || q) = sum p * log(p / q), with 0 * log(0/.) = 0.

    Either argument may be a constant array or a differentiable tensor.
    Both arguments are floored at `eps` inside the logs; the floored
    denominator is renormalized to total mass 1.
    """
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape or p.data.ndim != 1:
        raise ValueError(f"distributions must be equal-length vectors, got {p.shape} and {q.shape}")
    q_floored = q.clip_min(eps)
    log_q = (q_floored / q_floored.sum()).log()
    log_p = p.clip_min(eps).log()
    # Entries with p == 0 contribute exactly 0: the coefficient multiplies
    # a finite (floored) log.
    return (p * (log_p - log_q)).sum()


def discretize_ground_truth(pdf: GroundTruthSimPDF, bins: int, sigma: float = 0.1,
                            mode: str = "gaussian") -> SimilarityHistogram:
    """Spread the ground-truth similarity atoms over histogram bins.

    `gaussian` applies the same kernel used for the predicted histogram,
    weighted by each atom's mass, so prediction and target live on
    comparable supports; `hard` assigns each atom's mass to its containing
    bin. Either way the result is floored to stay strictly positive and
    renormalized to sum 1.
    """
    if bins < 1:
        raise ValueError("bin count must be >= 1")
    delta = 1.0 / bins
    if mode == "gaussian":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        centers = (np.arange(bins) + 0.5) * delta
        z = pdf.values[:, None] - centers[None, :]
        kernel = np.exp(-(z * z) / (2.0 * sigma * sigma)) * (delta / (sigma * SQRT_2PI))
        values = pdf.masses @ kernel
    elif mode == "hard":
        values = np.zeros(bins)
        np.add.at(values, _bin_index(pdf.values, bins), pdf.masses)
    else:
        raise ValueError(f"unknown ground-truth smoothing mode {mode!r}")
    values = np.maximum(values, _GT_FLOOR)
    values = values / values.sum()
    return SimilarityHistogram(bins=bins, values=values, normalized=True)


def sim_prop_loss(features_a, features_b, proportions_a, proportions_b,
                  bins: int = 20, sigma: float = 0.1, pairing: str = "aligned",
                  smoothing: str = "gaussian") -> Tensor:
    """Similarity-proportion loss between two equally sized bags.

    Instance features (N, D) are compared with the scaled cosine —
    index-aligned pairs by default, or every cross pair with
    ``pairing="full-cross"`` — and soft-binned into the predicted
    histogram. The target histogram comes from the two bags' class
    proportions and the ordinal class similarity. Returns
    KL(predicted || target), differentiable w.r.t. all features.
    """
    features_a, features_b = as_tensor(features_a), as_tensor(features_b)
    if features_a.shape != features_b.shape:
        raise ValueError(
            f"bag size mismatch: {features_a.shape} vs {features_b.shape}")
    if pairing == "aligned":
        sims = pairwise_scaled_cosine(features_a, features_b)
    elif pairing == "full-cross":
        sims = cross_scaled_cosine(features_a, features_b)
    else:
        raise ValueError(f"unknown pairing mode {pairing!r}")
    predicted = gaussian_histogram(sims, bins, sigma, normalized=True)
    target = discretize_ground_truth(ground_truth_pdf(proportions_a, proportions_b),
                                     bins, sigma, mode=smoothing)
    return kl_divergence(predicted.values, target.values)


def aggregate_predictions(confidences) -> Tensor:
    """Bag-level predicted proportions: the mean of per-instance softmax rows."""
    confidences = as_tensor(confidences)
    if confidences.data.ndim != 2 or confidences.shape[0] == 0:
        raise ValueError("expected a nonempty (N, K) confidence matrix")
    row_sums = confidences.data.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise ValueError("each confidence row must sum to 1")
    return confidences.sum(axis=0) * (1.0 / confidences.shape[0])


def prop_loss(proportions, predicted) -> Tensor:
    """Proportion loss KL(true || predicted) for one bag.

    `proportions` is the bag's ground-truth class-proportion vector;
    `predicted` is the aggregated prediction (differentiable). Zero true
    proportions contribute nothing; the predicted side is floored at
    1e-8 inside the log.
    """
    proportions = validate_proportions(proportions)
    predicted = as_tensor(predicted)
    if predicted.shape != proportions.shape:
        raise ValueError(
            f"length mismatch: {proportions.shape} vs {predicted.shape}")
    if abs(float(predicted.data.sum()) - 1.0) > 1e-6:
        raise ValueError("predicted proportions must sum to 1")
    return kl_divergence(proportions, predicted)
