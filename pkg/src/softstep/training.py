"""Mini-batch training of the head against soft labels.

The loss is binary cross-entropy with a probabilistic target, clamped away
from 0 and 1 so activations that can leave (0, 1) (the sinusoidal step's
linear tails) never produce a non-finite loss. After every epoch the
validation loss is computed with dropout disabled, and the parameters with
the lowest validation loss so far are written to the checkpoint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activations import SsfParams
from .data import DataError, DisagreementDataset, FeaturizerConfig, featurize
from .network import DropoutMask, Gradients, HeadNetwork, backward, forward, save_checkpoint
from .seeding import derive_rng

__all__ = [
    "AdamConfig",
    "SgdConfig",
    "TrainConfig",
    "TrainReport",
    "NumericError",
    "AnnotatorMismatchError",
    "soft_cross_entropy",
    "soft_cross_entropy_gradient",
    "train",
]


class NumericError(RuntimeError):
    """Training produced a non-finite quantity and was aborted."""


class AnnotatorMismatchError(ValueError):
    """The head's annotator count disagrees with the dataset's."""


@dataclass(frozen=True)
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class SgdConfig:
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters. learning_rate = 0 is allowed so a
    no-op run can be asserted against; anything below 0 is rejected."""

    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: AdamConfig | SgdConfig = field(default_factory=AdamConfig)
    seed: int = 0
    loss_clamp_eps: float = 1e-7
    shuffle: bool = True

    def __post_init__(self) -> None:
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs!r}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if not math.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate!r}")
        if not (0.0 < self.loss_clamp_eps < 0.5):
            raise ValueError(f"loss_clamp_eps must lie in (0, 0.5), got {self.loss_clamp_eps!r}")
        if not isinstance(self.optimizer, (AdamConfig, SgdConfig)):
            raise ValueError(f"optimizer must be AdamConfig or SgdConfig, got {self.optimizer!r}")


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch losses and the best-validation bookkeeping of one run."""

    train_losses: tuple[float, ...]
    validation_losses: tuple[float, ...]
    best_epoch: int
    best_validation_loss: float
    checkpoint_path: str | None


def _check_target(target: float) -> None:
    if not (0.0 <= target <= 1.0):
        raise ValueError(f"target must lie in [0, 1], got {target!r}")


def soft_cross_entropy(prediction: float, target: float, clamp_eps: float = 1e-7) -> float:
    """Binary cross-entropy against a probabilistic target.

    The prediction is clamped into [clamp_eps, 1 - clamp_eps] first, so the
    result is finite for any finite prediction, including values outside
    [0, 1].
    """
    _check_target(target)
    if not math.isfinite(prediction):
        raise ValueError(f"prediction must be finite, got {prediction!r}")
    p = min(max(float(prediction), clamp_eps), 1.0 - clamp_eps)
    return -(target * math.log(p) + (1.0 - target) * math.log(1.0 - p))


def soft_cross_entropy_gradient(prediction: float, target: float, clamp_eps: float = 1e-7) -> float:
    """d loss / d prediction, with the clamp's gradient folded in.

    Inside [clamp_eps, 1 - clamp_eps] the clamp is pass-through and the
    gradient is (p - target) / (p * (1 - p)); strictly outside it is 0, so
    predictions past the clamp cannot drift further.
    """
    _check_target(target)
    if not math.isfinite(prediction):
        raise ValueError(f"prediction must be finite, got {prediction!r}")
    p = float(prediction)
    if p < clamp_eps or p > 1.0 - clamp_eps:
        return 0.0
    return (p - target) / (p * (1.0 - p))


_PARAM_NAMES = ("w1", "b1", "w2", "b2")


class _Adam:
    def __init__(self, net: HeadNetwork, learning_rate: float, cfg: AdamConfig) -> None:
        self.lr = learning_rate
        self.cfg = cfg
        self.t = 0
        self.m = {name: np.zeros_like(getattr(net, name)) if name != "b2" else 0.0 for name in _PARAM_NAMES}
        self.v = {name: np.zeros_like(getattr(net, name)) if name != "b2" else 0.0 for name in _PARAM_NAMES}

    def step(self, net: HeadNetwork, grads: Gradients) -> None:
        self.t += 1
        b1, b2, eps = self.cfg.beta1, self.cfg.beta2, self.cfg.eps
        correction1 = 1.0 - b1 ** self.t
        correction2 = 1.0 - b2 ** self.t
        for name in _PARAM_NAMES:
            g = getattr(grads, name)
            m = b1 * self.m[name] + (1.0 - b1) * g
            v = b2 * self.v[name] + (1.0 - b2) * (g * g)
            self.m[name], self.v[name] = m, v
            update = self.lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
            setattr(net, name, getattr(net, name) - update)
        net.b2 = float(net.b2)


class _Sgd:
    def __init__(self, net: HeadNetwork, learning_rate: float) -> None:
        self.lr = learning_rate

    def step(self, net: HeadNetwork, grads: Gradients) -> None:
        for name in _PARAM_NAMES:
            setattr(net, name, getattr(net, name) - self.lr * getattr(grads, name))
        net.b2 = float(net.b2)


def _make_optimizer(net: HeadNetwork, cfg: TrainConfig):
    if isinstance(cfg.optimizer, AdamConfig):
        return _Adam(net, cfg.learning_rate, cfg.optimizer)
    return _Sgd(net, cfg.learning_rate)


def _mean_eval_loss(net: HeadNetwork, features: np.ndarray, targets: np.ndarray, clamp_eps: float) -> float:
    losses = []
    for row, target in zip(features, targets):
        prediction, _ = forward(net, row)
        losses.append(soft_cross_entropy(prediction, float(target), clamp_eps))
    return math.fsum(losses) / len(losses)


def train(
    net: HeadNetwork,
    dataset: DisagreementDataset,
    featurizer: FeaturizerConfig,
    cfg: TrainConfig,
    *,
    checkpoint_path: str | Path | None = None,
    log_path: str | Path | None = None,
) -> TrainReport:
    """Optimize ``net`` in place on the dataset's train split.

    Runs ``cfg.epochs`` epochs of mini-batch updates on the mean clamped
    cross-entropy, recomputing the validation loss (dropout off) after each
    epoch. Whenever the validation loss improves, the current parameters are
    saved to ``checkpoint_path``; ties keep the earlier epoch. The network
    is left at its final-epoch parameters, the checkpoint holds the best.

    With ``log_path`` set, one JSON line per epoch is appended with keys
    epoch / train_loss / val_loss / is_best.
    """
    if not dataset.train or not dataset.validation:
        raise DataError("training requires non-empty train and validation splits")
    activation = net.config.output_activation
    if isinstance(activation, SsfParams):
        if dataset.annotator_count is None:
            raise AnnotatorMismatchError(
                f"the sinusoidal step head needs a constant annotator count, but the "
                f"dataset's annotator count varies or is unknown (head a={activation.a})"
            )
        if dataset.annotator_count != activation.a:
            raise AnnotatorMismatchError(
                f"head expects a={activation.a} annotators but the dataset has "
                f"annotator_count={dataset.annotator_count}"
            )
    if net.config.input_dim != featurizer.dimension:
        raise ValueError(
            f"network input_dim {net.config.input_dim} does not match featurizer "
            f"dimension {featurizer.dimension}"
        )

    x_train = np.stack([featurize(featurizer, inst.text) for inst in dataset.train])
    y_train = np.array([inst.soft_label for inst in dataset.train])
    x_val = np.stack([featurize(featurizer, inst.text) for inst in dataset.validation])
    y_val = np.array([inst.soft_label for inst in dataset.validation])

    optimizer = _make_optimizer(net, cfg)
    n = len(dataset.train)
    train_losses: list[float] = []
    val_losses: list[float] = []
    best_loss = math.inf
    best_epoch = 0

    log_handle = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            if cfg.shuffle:
                order = derive_rng(cfg.seed, epoch).permutation(n)
            else:
                order = np.arange(n)
            example_losses: list[float] = []
            for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
                batch = order[start : start + cfg.batch_size]
                total = Gradients.zeros(net.config)
                for idx in batch:
                    idx = int(idx)
                    mask = DropoutMask.for_example(net.config, cfg.seed, epoch, batch_index, idx)
                    try:
                        prediction, cache = forward(net, x_train[idx], mask)
                    except ValueError as exc:
                        # inputs were validated up front, so a failure here
                        # means the parameters blew up
                        raise NumericError(f"forward pass failed at epoch {epoch}: {exc}") from exc
                    if not math.isfinite(prediction):
                        raise NumericError(f"non-finite prediction at epoch {epoch}")
                    example_losses.append(soft_cross_entropy(prediction, float(y_train[idx]), cfg.loss_clamp_eps))
                    upstream = soft_cross_entropy_gradient(prediction, float(y_train[idx]), cfg.loss_clamp_eps)
                    total.add_(backward(net, cache, upstream))
                total.scale_(1.0 / len(batch))
                optimizer.step(net, total)

            train_loss = math.fsum(example_losses) / n
            val_loss = _mean_eval_loss(net, x_val, y_val, cfg.loss_clamp_eps)
            if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}: train={train_loss!r} val={val_loss!r}"
                )
            train_losses.append(train_loss)
            val_losses.append(val_loss)
            is_best = val_loss < best_loss
            if is_best:
                best_loss = val_loss
                best_epoch = epoch
                if checkpoint_path is not None:
                    save_checkpoint(
                        net,
                        checkpoint_path,
                        epoch=epoch,
                        validation_loss=val_loss,
                        seed=cfg.seed,
                    )
            if log_handle is not None:
                record = {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "is_best": is_best}
                log_handle.write(json.dumps(record) + "\n")
    finally:
        if log_handle is not None:
            log_handle.close()

    return TrainReport(
        train_losses=tuple(train_losses),
        validation_losses=tuple(val_losses),
        best_epoch=best_epoch,
        best_validation_loss=best_loss,
        checkpoint_path=None if checkpoint_path is None else str(checkpoint_path),
    )
