"""Two-stage training: similarity-proportion backbone updates, then a
label-proportion-trained classifier head on frozen features.

Stage 1 repeatedly samples a bag pair, runs all instances through the
backbone, and steps the optimizer on the similarity-proportion loss.
Stage 2 freezes the backbone, precomputes every bag's features once, and
trains only the head on the per-bag proportion loss.

All knobs live in :class:`TrainConfig`, which also parses the plain-text
``key=value`` experiment config files used by the CLI (unknown keys are
errors so typos fail loudly).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .bags import Bag, sample_bag_pair
from .diffcore import Tensor, zero_grads
from .losses import aggregate_predictions, prop_loss, sim_prop_loss
from .model import ModelParams, backbone_forward, head_forward

__all__ = [
    "TrainConfig",
    "ConfigError",
    "TrainingError",
    "TrainLog",
    "SGD",
    "Adam",
    "make_optimizer",
    "load_config",
    "parse_config_text",
    "config_to_text",
    "train_backbone",
    "train_head",
]


class ConfigError(ValueError):
    """Bad key, value, or type in an experiment config."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss)."""


@dataclass(frozen=True)
class TrainConfig:
    """Experiment configuration: data generation, model, and training."""

    # randomness
    seed: int = 20240629
    # synthetic data
    num_classes: int = 5
    input_dim: int = 32
    per_date_count: int = 2000
    manifold_radius: float = 3.0
    manifold_arc: float = 2.4
    noise_scale: float = 0.8
    hard_mode: bool = False
    schedule_file: str = ""
    # model
    feature_dim: int = 16
    backbone_hidden: tuple[int, ...] = (64, 64)
    head_hidden: tuple[int, ...] = (32, 32)
    freeze_policy: str = "none"        # none | all-but-last
    # training
    bag_size: int = 64
    bins: int = 20
    sigma: float = 0.1
    stage1_epochs: int = 30
    stage1_steps_per_epoch: int = 100
    stage2_epochs: int = 40
    learning_rate: float = 1e-3
    optimizer: str = "adam"            # adam | sgd
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    pairing: str = "aligned"           # aligned | full-cross
    gt_smoothing: str = "gaussian"     # gaussian | hard
    checkpoint_every: int = 0          # epochs; 0 = end of stage only
    deterministic: bool = True

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        positive = {
            "per_date_count": self.per_date_count, "bag_size": self.bag_size,
            "feature_dim": self.feature_dim, "input_dim": self.input_dim,
            "learning_rate": self.learning_rate,
            "stage1_steps_per_epoch": self.stage1_steps_per_epoch,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        for name, value in (("stage1_epochs", self.stage1_epochs),
                            ("stage2_epochs", self.stage2_epochs),
                            ("checkpoint_every", self.checkpoint_every)):
            if value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")
        if self.freeze_policy not in ("none", "all-but-last"):
            raise ConfigError(f"unknown freeze_policy {self.freeze_policy!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.pairing not in ("aligned", "full-cross"):
            raise ConfigError(f"unknown pairing {self.pairing!r}")
        if self.gt_smoothing not in ("gaussian", "hard"):
            raise ConfigError(f"unknown gt_smoothing {self.gt_smoothing!r}")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_sizes(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(s) for s in text.replace("x", ",").split(",") if s)


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse ``key=value`` lines ('#' comments allowed); unknown keys error."""
    cfg = base or TrainConfig()
    spec = {f.name: f.type for f in fields(TrainConfig)}
    updates = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in spec:
            raise ConfigError(f"line {i}: unknown config key {key!r}")
        try:
            current = getattr(cfg, key)
            if isinstance(current, bool):
                updates[key] = _parse_bool(value)
            elif isinstance(current, int):
                updates[key] = int(value)
            elif isinstance(current, float):
                updates[key] = float(value)
            elif isinstance(current, tuple):
                updates[key] = _parse_sizes(value)
            else:
                updates[key] = value
        except ValueError as exc:
            raise ConfigError(f"line {i}: bad value for {key!r}: {value!r}") from exc
    try:
        return replace(cfg, **updates)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), base)


def config_to_text(cfg: TrainConfig) -> str:
    """Serialize a config to key=value lines (round-trips through parse)."""
    lines = []
    for f in fields(TrainConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


# -- optimizers -----------------------------------------------------------------


class SGD:
    """Plain gradient descent: p <- p - lr * grad."""

    def __init__(self, params: list[Tensor], lr: float):
        self.params = list(params)
        self.lr = float(lr)

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * p.grad

    def zero_grad(self) -> None:
        zero_grads(self.params)


class Adam:
    """Adaptive-moment update with bias correction."""

    def __init__(self, params: list[Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = float(beta1), float(beta2), float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def zero_grad(self) -> None:
        zero_grads(self.params)


def make_optimizer(params: list[Tensor], cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return SGD(params, cfg.learning_rate)
    return Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)


# -- logging and helpers ----------------------------------------------------------


class TrainLog:
    """Loss trace: stage-1 rows are per step, stage-2 rows per epoch."""

    def __init__(self):
        self.rows: list[tuple[int, int, float]] = []

    def append(self, step: int, stage: int, loss: float) -> None:
        self.rows.append((step, stage, loss))

    def stage_losses(self, stage: int) -> list[float]:
        return [loss for _, s, loss in self.rows if s == stage]

    def write_csv(self, path) -> None:
        lines = ["step,stage,loss"]
        lines += [f"{step},{stage},{loss!r}" for step, stage, loss in self.rows]
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def params_digest(params: ModelParams) -> str:
    """SHA-256 over all weights; used to assert stage separation."""
    h = hashlib.sha256()
    for arr in params.backbone.state_arrays() + params.head.state_arrays():
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()


def _stage1_params(params: ModelParams, cfg: TrainConfig) -> list[Tensor]:
    backbone = params.backbone
    if cfg.freeze_policy == "all-but-last":
        return [backbone.weights[-1], backbone.biases[-1]]
    return backbone.parameters()


# -- training stages ---------------------------------------------------------------


def train_backbone(bags: list[Bag], params: ModelParams, cfg: TrainConfig,
                   rng: np.random.Generator, checkpoint_cb=None) -> TrainLog:
    """Stage 1: update the backbone with the similarity-proportion loss.

    Runs ``stage1_epochs * stage1_steps_per_epoch`` steps of {sample bag
    pair, forward, loss, backward, optimizer step}. Head parameters are
    untouched. Aborts with :class:`TrainingError` on a non-finite loss.
    """
    if len(bags) < 2 and cfg.stage1_epochs > 0:
        raise ValueError("stage 1 needs at least 2 bags")
    log = TrainLog()
    trainable = _stage1_params(params, cfg)
    opt = make_optimizer(trainable, cfg)
    step = 0
    for epoch in range(cfg.stage1_epochs):
        for _ in range(cfg.stage1_steps_per_epoch):
            pair = sample_bag_pair(bags, rng)
            raw_a, raw_b = pair.aligned_instances()
            feats_a = backbone_forward(params.backbone, raw_a)
            feats_b = backbone_forward(params.backbone, raw_b)
            loss = sim_prop_loss(feats_a, feats_b,
                                 pair.bag_a.proportions, pair.bag_b.proportions,
                                 bins=cfg.bins, sigma=cfg.sigma,
                                 pairing=cfg.pairing, smoothing=cfg.gt_smoothing)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite stage-1 loss at step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            log.append(step, 1, value)
            step += 1
        if checkpoint_cb and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            checkpoint_cb(1, epoch + 1, params)
    return log


def train_head(bags: list[Bag], params: ModelParams, cfg: TrainConfig,
               rng: np.random.Generator, checkpoint_cb=None) -> TrainLog:
    """Stage 2: train the head on frozen backbone features.

    Features are computed once per bag and treated as constants, so only
    head parameters can change. Logs the mean proportion loss per epoch.
    """
    if not bags:
        raise ValueError("stage 2 needs at least 1 bag")
    log = TrainLog()
    opt = make_optimizer(params.head.parameters(), cfg)
    # Frozen backbone: detach once, reuse every epoch.
    bag_features = [backbone_forward(params.backbone, bag.instances).data
                    for bag in bags]
    for epoch in range(cfg.stage2_epochs):
        order = rng.permutation(len(bags))
        total = 0.0
        for idx in order:
            confidences = head_forward(params.head, bag_features[idx])
            predicted = aggregate_predictions(confidences)
            loss = prop_loss(bags[idx].proportions, predicted)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite stage-2 loss in epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value
        log.append(epoch, 2, total / len(bags))
        if checkpoint_cb and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            checkpoint_cb(2, epoch + 1, params)
    return log
