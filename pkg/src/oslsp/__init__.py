"""Ordinal-scale learning from similarity proportions.

Weakly supervised training from bag-level class proportions: a
differentiable similarity-histogram KL loss updates the feature
extractor, then a label-proportion loss trains the classifier head.
"""

from .diffcore import Tensor, forward_backward, grad_check
from .losses import aggregate_predictions, prop_loss, sim_prop_loss
from .metrics import evaluate
from .model import init_params, load_checkpoint, save_checkpoint
from .ordinal import class_similarity, ground_truth_pdf
from .simhist import gaussian_histogram, indicator_histogram, scaled_cosine_similarity
from .train import TrainConfig, train_backbone, train_head

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "forward_backward",
    "grad_check",
    "class_similarity",
    "ground_truth_pdf",
    "scaled_cosine_similarity",
    "indicator_histogram",
    "gaussian_histogram",
    "sim_prop_loss",
    "prop_loss",
    "aggregate_predictions",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
    "evaluate",
    "TrainConfig",
    "train_backbone",
    "train_head",
    "__version__",
]
