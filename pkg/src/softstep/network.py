"""The dense classifier head: forward pass, manual backprop, checkpoints.

The head is a fixed small stack

    dropout -> dense(hidden_width) -> ReLU -> dropout -> dense(1) -> activation

consuming a feature vector and emitting one soft-label prediction. Dropout
is inverted: kept units are rescaled by 1/(1 - rate) at train time so the
evaluation path runs the unmodified network.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activations import (
    SigmoidParams,
    SsfParams,
    TailMode,
    activation_derivative,
    activation_value,
    relu_derivative,
    relu_value,
)
from .seeding import derive_rng

__all__ = [
    "HeadConfig",
    "HeadNetwork",
    "Gradients",
    "DropoutMask",
    "ForwardCache",
    "Checkpoint",
    "CheckpointError",
    "CheckpointFormatError",
    "CheckpointShapeError",
    "init_network",
    "forward",
    "backward",
    "save_checkpoint",
    "load_checkpoint",
    "activation_to_dict",
    "activation_from_dict",
]

CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """The file is not a readable checkpoint document."""


class CheckpointShapeError(CheckpointError):
    """Stored weights disagree with the stored config's shapes."""


@dataclass(frozen=True)
class HeadConfig:
    """Architecture of the classifier head.

    input_dim: width of the incoming feature vector.
    hidden_width: neurons in the single ReLU layer (default 20).
    dropout1 / dropout2: drop rates before and after the hidden layer
        (defaults 0.2 and 0.15).
    output_activation: parameters of the output nonlinearity, either a
        widened sigmoid or the sinusoidal step activation.
    """

    input_dim: int
    hidden_width: int = 20
    dropout1: float = 0.2
    dropout2: float = 0.15
    output_activation: SigmoidParams | SsfParams = field(default_factory=SigmoidParams)

    def __post_init__(self) -> None:
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise ValueError(f"input_dim must be a positive integer, got {self.input_dim!r}")
        if int(self.hidden_width) != self.hidden_width or self.hidden_width < 1:
            raise ValueError(f"hidden_width must be a positive integer, got {self.hidden_width!r}")
        for name in ("dropout1", "dropout2"):
            rate = getattr(self, name)
            if not (0.0 <= rate < 1.0) or not math.isfinite(rate):
                raise ValueError(f"{name} must lie in [0, 1), got {rate!r}")
        if not isinstance(self.output_activation, (SigmoidParams, SsfParams)):
            raise ValueError(
                f"output_activation must be SigmoidParams or SsfParams, got {self.output_activation!r}"
            )


@dataclass
class HeadNetwork:
    """Parameters of the head; w1 is (hidden_width, input_dim)."""

    config: HeadConfig
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def copy(self) -> "HeadNetwork":
        return HeadNetwork(self.config, self.w1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2))


@dataclass
class Gradients:
    """Gradient of a scalar loss w.r.t. every HeadNetwork parameter."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    @classmethod
    def zeros(cls, config: HeadConfig) -> "Gradients":
        return cls(
            w1=np.zeros((config.hidden_width, config.input_dim)),
            b1=np.zeros(config.hidden_width),
            w2=np.zeros(config.hidden_width),
            b2=0.0,
        )

    def add_(self, other: "Gradients") -> None:
        self.w1 += other.w1
        self.b1 += other.b1
        self.w2 += other.w2
        self.b2 += other.b2

    def scale_(self, factor: float) -> None:
        self.w1 *= factor
        self.b1 *= factor
        self.w2 *= factor
        self.b2 *= factor


def _draw_mask(rng: np.random.Generator, size: int, rate: float) -> np.ndarray:
    if rate == 0.0:
        return np.ones(size)
    keep = rng.random(size) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


@dataclass(frozen=True)
class DropoutMask:
    """Inverted-dropout masks; kept entries carry the 1/(1 - rate) scale."""

    input_mask: np.ndarray
    hidden_mask: np.ndarray

    @classmethod
    def sample(cls, config: HeadConfig, rng: np.random.Generator) -> "DropoutMask":
        return cls(
            input_mask=_draw_mask(rng, config.input_dim, config.dropout1),
            hidden_mask=_draw_mask(rng, config.hidden_width, config.dropout2),
        )

    @classmethod
    def for_example(
        cls, config: HeadConfig, seed: int, epoch: int, batch_index: int, example_index: int
    ) -> "DropoutMask":
        """Mask reproducible from its training coordinates."""
        return cls.sample(config, derive_rng(seed, epoch, batch_index, example_index))


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, consumed by backward()."""

    x_dropped: np.ndarray
    z1: np.ndarray
    hidden_dropped: np.ndarray
    z2: float
    hidden_mask: np.ndarray | None
    input_mask: np.ndarray | None


def init_network(config: HeadConfig, seed: int) -> HeadNetwork:
    """Initialize weights uniformly within +/- sqrt(6/(fan_in + fan_out)), biases zero."""
    rng = derive_rng(seed)
    bound1 = math.sqrt(6.0 / (config.input_dim + config.hidden_width))
    bound2 = math.sqrt(6.0 / (config.hidden_width + 1))
    return HeadNetwork(
        config=config,
        w1=rng.uniform(-bound1, bound1, size=(config.hidden_width, config.input_dim)),
        b1=np.zeros(config.hidden_width),
        w2=rng.uniform(-bound2, bound2, size=config.hidden_width),
        b2=0.0,
    )


def forward(
    net: HeadNetwork, features: np.ndarray, mask: DropoutMask | None = None
) -> tuple[float, ForwardCache]:
    """Run the head on one feature vector.

    With ``mask=None`` the pass is the evaluation path: both dropout layers
    are the identity. Passing a DropoutMask gives the training path.
    Returns the activation output and the cache backward() needs.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (net.config.input_dim,):
        raise ValueError(
            f"expected a feature vector of shape ({net.config.input_dim},), got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")

    if mask is None:
        x_dropped = x
        input_mask = hidden_mask = None
    else:
        x_dropped = x * mask.input_mask
        input_mask, hidden_mask = mask.input_mask, mask.hidden_mask

    z1 = net.w1 @ x_dropped + net.b1
    hidden = relu_value(z1)
    hidden_dropped = hidden if hidden_mask is None else hidden * hidden_mask
    z2 = float(net.w2 @ hidden_dropped + net.b2)
    prediction = activation_value(net.config.output_activation, z2)
    cache = ForwardCache(
        x_dropped=x_dropped,
        z1=z1,
        hidden_dropped=hidden_dropped,
        z2=z2,
        hidden_mask=hidden_mask,
        input_mask=input_mask,
    )
    return prediction, cache


def backward(net: HeadNetwork, cache: ForwardCache, d_loss_d_pred: float) -> Gradients:
    """Reverse-mode gradients of the loss through one cached forward pass."""
    dz2 = d_loss_d_pred * activation_derivative(net.config.output_activation, cache.z2)
    g_w2 = dz2 * cache.hidden_dropped
    g_b2 = float(dz2)
    d_hidden_dropped = dz2 * net.w2
    d_hidden = (
        d_hidden_dropped if cache.hidden_mask is None else d_hidden_dropped * cache.hidden_mask
    )
    dz1 = d_hidden * relu_derivative(cache.z1)
    g_w1 = np.outer(dz1, cache.x_dropped)
    g_b1 = dz1
    return Gradients(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)


def activation_to_dict(params: SigmoidParams | SsfParams) -> dict:
    """Serialize activation parameters to the JSON-friendly form used in checkpoints and configs."""
    if isinstance(params, SigmoidParams):
        return {"kind": "sigmoid", "widening": params.widening}
    if isinstance(params, SsfParams):
        return {"kind": "ssf", "a": params.a, "theta": params.theta, "tail": params.tail_mode.value}
    raise TypeError(f"unsupported activation parameters: {params!r}")


def activation_from_dict(doc: dict) -> SigmoidParams | SsfParams:
    """Inverse of :func:`activation_to_dict`."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError(f"activation document must be a dict with a 'kind', got {doc!r}")
    kind = doc["kind"]
    if kind == "sigmoid":
        return SigmoidParams(widening=float(doc.get("widening", 5.0)))
    if kind == "ssf":
        return SsfParams(
            a=int(doc["a"]),
            theta=float(doc["theta"]),
            tail_mode=TailMode(doc.get("tail", TailMode.AFFINE_JUMP.value)),
        )
    raise ValueError(f"unknown activation kind {kind!r}")


@dataclass(frozen=True)
class Checkpoint:
    """A saved network plus the training metadata stored alongside it."""

    network: HeadNetwork
    epoch: int | None = None
    validation_loss: float | None = None
    seed: int | None = None


def save_checkpoint(
    net: HeadNetwork,
    path: str | Path,
    *,
    epoch: int | None = None,
    validation_loss: float | None = None,
    seed: int | None = None,
) -> None:
    """Write the network as a self-describing JSON document.

    Weights are emitted through Python's float repr, which round-trips
    float64 exactly, so a save/load cycle is bit-exact.
    """
    config = net.config
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "head_config": {
            "input_dim": config.input_dim,
            "hidden_width": config.hidden_width,
            "dropout1": config.dropout1,
            "dropout2": config.dropout2,
            "output_activation": activation_to_dict(config.output_activation),
        },
        "weights": {
            "w1": net.w1.tolist(),
            "b1": net.b1.tolist(),
            "w2": net.w2.tolist(),
            "b2": float(net.b2),
        },
        "metadata": {"epoch": epoch, "validation_loss": validation_loss, "seed": seed},
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _weight_array(weights: dict, name: str, shape: tuple[int, ...]) -> np.ndarray:
    if name not in weights:
        raise CheckpointFormatError(f"checkpoint weights are missing {name!r}")
    try:
        arr = np.asarray(weights[name], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CheckpointShapeError(f"weight {name!r} is not a well-formed array: {exc}") from exc
    if arr.shape != shape:
        raise CheckpointShapeError(f"weight {name!r} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise CheckpointFormatError(f"weight {name!r} contains non-finite entries")
    return arr


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint document back into a network.

    Raises FileNotFoundError for a missing file, CheckpointFormatError for
    an unreadable or invalid document, and CheckpointShapeError when the
    stored weights do not match the stored config.
    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise CheckpointFormatError(f"not a JSON checkpoint: {exc}") from exc
    if not isinstance(doc, dict):
        raise CheckpointFormatError("checkpoint document must be a JSON object")
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint format_version {version!r}")
    for key in ("head_config", "weights"):
        if key not in doc:
            raise CheckpointFormatError(f"checkpoint is missing {key!r}")

    cfg_doc = doc["head_config"]
    try:
        config = HeadConfig(
            input_dim=int(cfg_doc["input_dim"]),
            hidden_width=int(cfg_doc["hidden_width"]),
            dropout1=float(cfg_doc["dropout1"]),
            dropout2=float(cfg_doc["dropout2"]),
            output_activation=activation_from_dict(cfg_doc["output_activation"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"invalid head_config: {exc}") from exc

    weights = doc["weights"]
    if not isinstance(weights, dict):
        raise CheckpointFormatError("checkpoint 'weights' must be a JSON object")
    w1 = _weight_array(weights, "w1", (config.hidden_width, config.input_dim))
    b1 = _weight_array(weights, "b1", (config.hidden_width,))
    w2 = _weight_array(weights, "w2", (config.hidden_width,))
    b2 = weights.get("b2")
    if not isinstance(b2, (int, float)) or not math.isfinite(b2):
        raise CheckpointFormatError(f"weight 'b2' must be a finite scalar, got {b2!r}")

    meta = doc.get("metadata") or {}
    network = HeadNetwork(config=config, w1=w1, b1=b1, w2=w2, b2=float(b2))
    return Checkpoint(
        network=network,
        epoch=meta.get("epoch"),
        validation_loss=meta.get("validation_loss"),
        seed=meta.get("seed"),
    )
