"""Soft-label disagreement learning with step-like output activations.

A small numpy library around three output-layer strategies for predicting
annotator-disagreement soft labels: a widened sigmoid, a sinusoidal step
activation whose slope vanishes at the valid grid values, and a
post-training quantizer that snaps predictions to the grid. Includes a
from-scratch dense head with manual backprop, deterministic training with
best-validation checkpointing, and soft/hard evaluation.
"""

from .activations import (
    SigmoidParams,
    SsfParams,
    StepGrid,
    TailMode,
    activation_derivative,
    activation_value,
    relu_derivative,
    relu_value,
    ssf_derivative,
    ssf_value,
    step_quantize,
    widened_sigmoid_derivative,
    widened_sigmoid_value,
)
from .data import (
    DataError,
    DatasetFormat,
    DisagreementDataset,
    FeaturizerConfig,
    Instance,
    derive_soft_label,
    featurize,
    load_dataset,
    load_split,
    save_dataset,
    save_split,
    synthesize_dataset,
    tokenize,
)
from .evaluation import (
    Approach,
    ApproachSpec,
    ConfusionCounts,
    EvaluationReport,
    class_f1,
    confusion_from_labels,
    evaluate,
    micro_f1,
    predict_soft,
    soft_to_hard,
)
from .network import (
    Checkpoint,
    CheckpointError,
    CheckpointFormatError,
    CheckpointShapeError,
    DropoutMask,
    ForwardCache,
    Gradients,
    HeadConfig,
    HeadNetwork,
    backward,
    forward,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    AdamConfig,
    AnnotatorMismatchError,
    NumericError,
    SgdConfig,
    TrainConfig,
    TrainReport,
    soft_cross_entropy,
    soft_cross_entropy_gradient,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # activations
    "TailMode",
    "SsfParams",
    "SigmoidParams",
    "StepGrid",
    "ssf_value",
    "ssf_derivative",
    "widened_sigmoid_value",
    "widened_sigmoid_derivative",
    "step_quantize",
    "relu_value",
    "relu_derivative",
    "activation_value",
    "activation_derivative",
    # network
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
    # data
    "DataError",
    "DatasetFormat",
    "Instance",
    "DisagreementDataset",
    "FeaturizerConfig",
    "derive_soft_label",
    "tokenize",
    "featurize",
    "load_split",
    "load_dataset",
    "save_split",
    "save_dataset",
    "synthesize_dataset",
    # training
    "AdamConfig",
    "SgdConfig",
    "TrainConfig",
    "TrainReport",
    "NumericError",
    "AnnotatorMismatchError",
    "soft_cross_entropy",
    "soft_cross_entropy_gradient",
    "train",
    # evaluation
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
