"""Feature extractor (backbone) and classifier head.

Both are small fully connected networks over the autodiff tensors. The
backbone uses tanh hidden layers (a smooth nonlinearity keeps the
similarity-histogram loss smooth in the weights) with a linear output;
the head is a three-layer perceptron with ReLU hidden layers and a
softmax output.

Checkpoints are flat binary files: the magic line ``OSLSP1``, one
key=value header line describing the architecture and seed, then all
weights as little-endian float64 — for each backbone layer the weight
matrix in row-major order followed by its bias, then the head layers in
the same scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffcore import Tensor, as_tensor

__all__ = [
    "ArchitectureConfig",
    "Backbone",
    "ClassifierHead",
    "ModelParams",
    "CheckpointError",
    "init_params",
    "backbone_forward",
    "head_forward",
    "softmax_rows",
    "predict_classes",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"OSLSP1\n"


class CheckpointError(ValueError):
    """Checkpoint file is missing, truncated, or malformed."""


@dataclass(frozen=True)
class ArchitectureConfig:
    input_dim: int = 32
    backbone_hidden: tuple[int, ...] = (64, 64)
    feature_dim: int = 16
    head_hidden: tuple[int, ...] = (32, 32)
    num_classes: int = 5

    def __post_init__(self):
        sizes = (self.input_dim, *self.backbone_hidden, self.feature_dim,
                 *self.head_hidden, self.num_classes)
        if any(s < 1 for s in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {sizes}")

    @property
    def backbone_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.backbone_hidden, self.feature_dim)

    @property
    def head_sizes(self) -> tuple[int, ...]:
        return (self.feature_dim, *self.head_hidden, self.num_classes)


@dataclass
class _Mlp:
    sizes: tuple[int, ...]
    weights: list[Tensor] = field(default_factory=list)
    biases: list[Tensor] = field(default_factory=list)

    def parameters(self) -> list[Tensor]:
        return [*self.weights, *self.biases]

    def state_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w.data, b.data])
        return out


class Backbone(_Mlp):
    """Maps raw inputs (N, D_in) to feature vectors (N, D)."""


class ClassifierHead(_Mlp):
    """Maps features (N, D) to class confidences (N, K) summing to 1."""


@dataclass
class ModelParams:
    arch: ArchitectureConfig
    backbone: Backbone
    head: ClassifierHead
    seed: int

    def parameters(self) -> list[Tensor]:
        return self.backbone.parameters() + self.head.parameters()


def _init_mlp(cls, sizes: tuple[int, ...], rng: np.random.Generator):
    mlp = cls(sizes=tuple(sizes))
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        mlp.weights.append(Tensor(w, requires_grad=True))
        mlp.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
    return mlp


def init_params(seed: int, arch: ArchitectureConfig | None = None) -> ModelParams:
    """Reproducible scaled-uniform initialization of backbone and head."""
    arch = arch or ArchitectureConfig()
    rng = np.random.default_rng(seed)
    backbone = _init_mlp(Backbone, arch.backbone_sizes, rng)
    head = _init_mlp(ClassifierHead, arch.head_sizes, rng)
    return ModelParams(arch=arch, backbone=backbone, head=head, seed=int(seed))


def _as_batch(x, dim: int, what: str) -> tuple[Tensor, bool]:
    x = as_tensor(x)
    squeeze = x.data.ndim == 1
    if squeeze:
        x = x.reshape(1, x.shape[0])
    if x.data.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"{what} dimension mismatch: expected {dim}, got {x.shape}")
    return x, squeeze


def backbone_forward(backbone: Backbone, inputs) -> Tensor:
    """Deterministic feature vectors; accepts (N, D_in) or a single vector."""
    h, squeeze = _as_batch(inputs, backbone.sizes[0], "input")
    last = len(backbone.weights) - 1
    for i, (w, b) in enumerate(zip(backbone.weights, backbone.biases)):
        h = h @ w + b
        if i < last:
            h = h.tanh()
    return h.reshape(h.shape[1]) if squeeze else h


def softmax_rows(logits: Tensor) -> Tensor:
    """Row-wise softmax. The max shift is constant w.r.t. the logits
    (softmax is shift invariant, so the gradient is unchanged)."""
    shifted = logits - np.max(logits.data, axis=1, keepdims=True)
    exps = shifted.exp()
    return exps / exps.sum(axis=1, keepdims=True)


def head_forward(head: ClassifierHead, features) -> Tensor:
    """Class confidences summing to 1 per instance; (N, D) or a single vector."""
    h, squeeze = _as_batch(features, head.sizes[0], "feature")
    last = len(head.weights) - 1
    for i, (w, b) in enumerate(zip(head.weights, head.biases)):
        h = h @ w + b
        if i < last:
            h = h.relu()
    out = softmax_rows(h)
    return out.reshape(out.shape[1]) if squeeze else out


def predict_classes(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Argmax class labels in 1..K; ties break to the lowest class index."""
    features = backbone_forward(params.backbone, np.asarray(inputs, dtype=np.float64))
    confidences = head_forward(params.head, features.detach())
    return np.argmax(confidences.data, axis=1) + 1


# -- checkpoint I/O -------------------------------------------------------------


def _arch_header(params: ModelParams) -> str:
    a = params.arch
    fields = [
        f"input_dim={a.input_dim}",
        "backbone_hidden=" + "x".join(str(s) for s in a.backbone_hidden),
        f"feature_dim={a.feature_dim}",
        "head_hidden=" + "x".join(str(s) for s in a.head_hidden),
        f"num_classes={a.num_classes}",
        f"seed={params.seed}",
    ]
    return ",".join(fields) + "\n"


def save_checkpoint(path, params: ModelParams) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(_arch_header(params).encode("ascii"))
        for arr in params.backbone.state_arrays() + params.head.state_arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _parse_sizes(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split("x")) if text else ()


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: bad magic, not a model checkpoint")
        header = fh.readline().decode("ascii").strip()
        kv = {}
        for item in header.split(","):
            key, _, value = item.partition("=")
            kv[key] = value
        try:
            arch = ArchitectureConfig(
                input_dim=int(kv["input_dim"]),
                backbone_hidden=_parse_sizes(kv["backbone_hidden"]),
                feature_dim=int(kv["feature_dim"]),
                head_hidden=_parse_sizes(kv["head_hidden"]),
                num_classes=int(kv["num_classes"]),
            )
            seed = int(kv["seed"])
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"{path}: malformed header {header!r}") from exc
        params = init_params(seed, arch)
        raw = fh.read()
    expected = sum(fan_in * fan_out + fan_out
                   for sizes in (arch.backbone_sizes, arch.head_sizes)
                   for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))
    flat = np.frombuffer(raw, dtype="<f8")
    if flat.size != expected:
        raise CheckpointError(
            f"{path}: expected {expected} weights, found {flat.size}")
    offset = 0
    for mlp in (params.backbone, params.head):
        for w, b in zip(mlp.weights, mlp.biases):
            for t in (w, b):
                n = t.data.size
                t.data = flat[offset:offset + n].reshape(t.data.shape).astype(np.float64)
                offset += n
    return params
