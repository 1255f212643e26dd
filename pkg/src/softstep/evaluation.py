"""Inference paths for the three soft-label approaches, and split metrics.

The sigmoid approach reads the widened-sigmoid head's output directly, the
ssf approach reads the sinusoidal-step head's output, and the step approach
trains nothing extra: it snaps a sigmoid head's output to the soft-label
grid at inference time. Hard labels come from thresholding the soft
prediction at 0.5, with 0.5 itself mapping to class 0. The hard metric is
micro-averaged F1, which for single-label binary classification equals
accuracy; per-class and macro F1 are reported as diagnostics for skewed
label distributions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .activations import SigmoidParams, SsfParams, StepGrid, step_quantize
from .data import DataError, FeaturizerConfig, Instance, featurize
from .network import HeadNetwork, forward
from .training import soft_cross_entropy

__all__ = [
    "Approach",
    "ApproachSpec",
    "ConfusionCounts",
    "EvaluationReport",
    "predict_soft",
    "soft_to_hard",
    "confusion_from_labels",
    "micro_f1",
    "class_f1",
    "evaluate",
]


class Approach(enum.Enum):
    SIGMOID = "sigmoid"
    SSF = "ssf"
    STEP_OVER_SIGMOID = "step"


@dataclass(frozen=True)
class ApproachSpec:
    """Which inference path to run; STEP_OVER_SIGMOID needs the value grid."""

    variant: Approach
    grid: StepGrid | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.variant, Approach):
            raise ValueError(f"variant must be an Approach, got {self.variant!r}")
        if self.variant is Approach.STEP_OVER_SIGMOID:
            if self.grid is None:
                raise ValueError("the quantizing approach requires a StepGrid")
        elif self.grid is not None:
            raise ValueError(f"{self.variant} takes no grid")


def predict_soft(net: HeadNetwork, approach: ApproachSpec, features: np.ndarray) -> float:
    """One soft-label prediction on the evaluation path (dropout off)."""
    activation = net.config.output_activation
    if approach.variant is Approach.SSF:
        if not isinstance(activation, SsfParams):
            raise ValueError("the sinusoidal-step approach needs a network with an SSF output head")
    else:
        if not isinstance(activation, SigmoidParams):
            raise ValueError(f"{approach.variant} needs a network with a sigmoid output head")
    prediction, _ = forward(net, features)
    if approach.variant is Approach.STEP_OVER_SIGMOID:
        return step_quantize(approach.grid, prediction)
    return prediction


def soft_to_hard(soft: float) -> int:
    """0 for a soft label <= 0.5, else 1."""
    if not math.isfinite(soft):
        raise ValueError(f"soft label must be finite, got {soft!r}")
    return 0 if soft <= 0.5 else 1


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_from_labels(targets, predictions) -> ConfusionCounts:
    """Pool binary targets/predictions into confusion counts (positive = 1)."""
    targets = list(targets)
    predictions = list(predictions)
    if len(targets) != len(predictions):
        raise ValueError(f"got {len(targets)} targets but {len(predictions)} predictions")
    tp = fp = tn = fn = 0
    for target, predicted in zip(targets, predictions):
        if target not in (0, 1) or predicted not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got target={target!r} predicted={predicted!r}")
        if predicted == 1:
            if target == 1:
                tp += 1
            else:
                fp += 1
        else:
            if target == 1:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def micro_f1(confusion: ConfusionCounts) -> float:
    """Micro-averaged F1 over both classes.

    Pooling per-class true positives and errors makes micro precision and
    recall both equal (tp + tn) / n, so the micro F1 of a single-label
    binary problem is exactly accuracy.
    """
    if confusion.n < 1:
        raise ValueError("confusion counts are empty")
    return (confusion.tp + confusion.tn) / confusion.n


def class_f1(confusion: ConfusionCounts, positive_class: int = 1) -> float:
    """Per-class F1 = 2*prec*rec/(prec+rec), with 0/0 defined as 0."""
    if positive_class == 1:
        tp, fp, fn = confusion.tp, confusion.fp, confusion.fn
    elif positive_class == 0:
        tp, fp, fn = confusion.tn, confusion.fn, confusion.fp
    else:
        raise ValueError(f"positive_class must be 0 or 1, got {positive_class!r}")
    denominator = 2 * tp + fp + fn
    if denominator == 0:
        return 0.0
    return 2 * tp / denominator


@dataclass(frozen=True)
class EvaluationReport:
    """Soft cross-entropy and hard micro-F1 of one approach on one split."""

    soft_loss: float
    micro_f1: float
    confusion: ConfusionCounts
    f1_positive: float
    f1_negative: float
    macro_f1: float
    n: int

    def to_dict(self) -> dict:
        return {
            "soft_loss": self.soft_loss,
            "micro_f1": self.micro_f1,
            "confusion": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "tn": self.confusion.tn,
                "fn": self.confusion.fn,
            },
            "f1_positive": self.f1_positive,
            "f1_negative": self.f1_negative,
            "macro_f1": self.macro_f1,
            "n": self.n,
        }

    def summary_line(self) -> str:
        c = self.confusion
        return (
            f"n={self.n} soft_loss={self.soft_loss:.6f} micro_f1={self.micro_f1:.4f} "
            f"(tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn})"
        )


def _hard_target(inst: Instance) -> int:
    return inst.hard_label if inst.hard_label is not None else soft_to_hard(inst.soft_label)


def evaluate(
    net: HeadNetwork,
    approach: ApproachSpec,
    split,
    featurizer: FeaturizerConfig,
    clamp_eps: float = 1e-7,
) -> EvaluationReport:
    """Score one split: mean clamped cross-entropy plus hard-label metrics.

    Hard targets use an instance's stored hard label when present and are
    otherwise derived from its soft label. The loss sum is order-independent
    (compensated summation), so the report does not depend on split order.
    """
    instances = list(split)
    if not instances:
        raise DataError("cannot evaluate an empty split")
    losses = []
    hard_targets = []
    hard_predictions = []
    for inst in instances:
        prediction = predict_soft(net, approach, featurize(featurizer, inst.text))
        losses.append(soft_cross_entropy(prediction, inst.soft_label, clamp_eps))
        hard_targets.append(_hard_target(inst))
        hard_predictions.append(soft_to_hard(prediction))
    confusion = confusion_from_labels(hard_targets, hard_predictions)
    f1_pos = class_f1(confusion, positive_class=1)
    f1_neg = class_f1(confusion, positive_class=0)
    return EvaluationReport(
        soft_loss=math.fsum(losses) / len(losses),
        micro_f1=micro_f1(confusion),
        confusion=confusion,
        f1_positive=f1_pos,
        f1_negative=f1_neg,
        macro_f1=(f1_pos + f1_neg) / 2.0,
        n=len(instances),
    )
