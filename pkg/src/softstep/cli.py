"""Command-line front end: train, evaluate, predict, plot-activation, synth-data.

One JSON config file describes a run; flags override config values. Exit
codes: 0 success, 2 config/validation error, 3 data error, 4 numeric
failure. Failures print a single JSON line to stderr with keys ``error``
(exception kind) and ``message``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .activations import (
    SigmoidParams,
    SsfParams,
    StepGrid,
    TailMode,
    ssf_derivative,
    ssf_value,
    step_quantize,
    widened_sigmoid_value,
)
from .data import (
    DataError,
    DatasetFormat,
    DisagreementDataset,
    FeaturizerConfig,
    featurize,
    load_split,
    save_dataset,
    synthesize_dataset,
)
from .evaluation import (
    Approach,
    ApproachSpec,
    evaluate,
    predict_soft,
    soft_to_hard,
)
from .network import (
    CheckpointError,
    HeadConfig,
    activation_from_dict,
    init_network,
    load_checkpoint,
)
from .training import (
    AdamConfig,
    AnnotatorMismatchError,
    NumericError,
    SgdConfig,
    TrainConfig,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_SPLIT_NAMES = ("train", "validation", "test")


class ConfigError(Exception):
    """The run configuration is missing, unreadable, or inconsistent."""


def _fail(code: int, exc: BaseException) -> int:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)
    return code


def _read_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _featurizer_from(doc: dict) -> FeaturizerConfig:
    return FeaturizerConfig(
        dimension=int(doc.get("dimension", 16384)),
        ngram_orders=frozenset(int(order) for order in doc.get("ngram_orders", (1, 2))),
        lowercase=bool(doc.get("lowercase", True)),
        hash_seed=int(doc.get("hash_seed", 0)),
    )


def _head_from(doc: dict, featurizer: FeaturizerConfig, args) -> HeadConfig:
    activation_doc = dict(doc.get("activation", {"kind": "sigmoid"}))
    if activation_doc.get("kind") == "ssf":
        if getattr(args, "a", None) is not None:
            activation_doc["a"] = args.a
        if getattr(args, "theta", None) is not None:
            activation_doc["theta"] = args.theta
        if getattr(args, "tail", None) is not None:
            activation_doc["tail"] = args.tail
        activation_doc.setdefault("theta", 0.05)
    else:
        for flag in ("theta", "tail"):
            if getattr(args, flag, None) is not None:
                raise ConfigError(f"--{flag} only applies to an ssf output head")
    return HeadConfig(
        input_dim=featurizer.dimension,
        hidden_width=int(doc.get("hidden_width", 20)),
        dropout1=float(doc.get("dropout1", 0.2)),
        dropout2=float(doc.get("dropout2", 0.15)),
        output_activation=activation_from_dict(activation_doc),
    )


def _training_from(doc: dict, seed: int) -> TrainConfig:
    optimizer_name = str(doc.get("optimizer", "adam")).lower()
    if optimizer_name == "adam":
        optimizer = AdamConfig()
    elif optimizer_name == "sgd":
        optimizer = SgdConfig()
    else:
        raise ConfigError(f"unknown optimizer {optimizer_name!r}, expected 'adam' or 'sgd'")
    return TrainConfig(
        epochs=int(doc.get("epochs", 100)),
        batch_size=int(doc.get("batch_size", 16)),
        learning_rate=float(doc.get("learning_rate", 1e-3)),
        optimizer=optimizer,
        seed=seed,
        loss_clamp_eps=float(doc.get("loss_clamp_eps", 1e-7)),
        shuffle=bool(doc.get("shuffle", True)),
    )


def _data_paths_from(doc: dict) -> tuple[dict[str, Path | None], DatasetFormat]:
    try:
        fmt = DatasetFormat(doc.get("format", "json"))
    except ValueError as exc:
        raise ConfigError(f"unknown dataset format {doc.get('format')!r}") from exc
    if "dir" in doc:
        base = Path(doc["dir"])
        paths = {name: base / f"{name}.{fmt.value}" for name in _SPLIT_NAMES}
    else:
        paths = {name: Path(doc[name]) if name in doc else None for name in _SPLIT_NAMES}
    return paths, fmt


def _load_dataset_from_paths(
    paths: dict[str, Path | None], fmt: DatasetFormat, required: tuple[str, ...]
) -> DisagreementDataset:
    splits = {}
    for name in _SPLIT_NAMES:
        path = paths.get(name)
        if path is None:
            if name in required:
                raise ConfigError(f"config does not name a {name} split file")
            splits[name] = []
            continue
        if not path.exists():
            if name in required:
                raise DataError(f"{name} split file not found: {path}")
            splits[name] = []
            continue
        splits[name] = load_split(path, fmt)
    return DisagreementDataset.from_splits(splits["train"], splits["validation"], splits["test"])


def _approach_from(name: str, annotator_count: int | None, a_override: int | None) -> ApproachSpec:
    if name == "sigmoid":
        return ApproachSpec(Approach.SIGMOID)
    if name == "ssf":
        return ApproachSpec(Approach.SSF)
    if name == "step":
        a = a_override if a_override is not None else annotator_count
        if a is None:
            raise ConfigError(
                "the step approach needs a constant annotator count; pass --a or "
                "use a dataset with a constant number of annotators"
            )
        return ApproachSpec(Approach.STEP_OVER_SIGMOID, StepGrid(a))
    raise ConfigError(f"unknown approach {name!r}, expected sigmoid, ssf, or step")


def _default_approach_for(net) -> str:
    return "ssf" if isinstance(net.config.output_activation, SsfParams) else "sigmoid"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_train(args) -> int:
    doc = _read_config_file(args.config)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    out_dir = Path(args.out if args.out is not None else doc.get("out_dir", "runs/latest"))
    featurizer = _featurizer_from(doc.get("featurizer", {}))
    head = _head_from(doc.get("head", {}), featurizer, args)
    if isinstance(head.output_activation, SigmoidParams) and args.a is not None:
        raise ConfigError("--a only applies to an ssf output head when training")
    training_cfg = _training_from(doc.get("training", {}), seed)
    paths, fmt = _data_paths_from(doc.get("data", {}))
    dataset = _load_dataset_from_paths(paths, fmt, required=("train", "validation"))

    net = init_network(head, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = train(
        net,
        dataset,
        featurizer,
        training_cfg,
        checkpoint_path=out_dir / "checkpoint.json",
        log_path=out_dir / "epoch_log.jsonl",
    )
    report_doc = {
        "epochs": training_cfg.epochs,
        "best_epoch": report.best_epoch,
        "best_validation_loss": report.best_validation_loss,
        "train_losses": list(report.train_losses),
        "validation_losses": list(report.validation_losses),
        "checkpoint": report.checkpoint_path,
        "seed": seed,
    }
    with open(out_dir / "train_report.json", "w", encoding="utf-8") as handle:
        json.dump(report_doc, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(
        f"trained {training_cfg.epochs} epochs; best epoch {report.best_epoch} "
        f"with validation loss {report.best_validation_loss:.6f}; "
        f"checkpoint {report.checkpoint_path}"
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    doc = _read_config_file(args.config)
    out_dir = Path(args.out) if args.out is not None else (
        Path(doc["out_dir"]) if "out_dir" in doc else None
    )
    checkpoint_path = args.checkpoint
    if checkpoint_path is None:
        if out_dir is None:
            raise ConfigError("pass --checkpoint, or a config/--out naming the run directory")
        checkpoint_path = out_dir / "checkpoint.json"
    checkpoint = load_checkpoint(checkpoint_path)
    net = checkpoint.network

    featurizer = _featurizer_from(doc.get("featurizer", {}))
    if featurizer.dimension != net.config.input_dim:
        raise ConfigError(
            f"featurizer dimension {featurizer.dimension} does not match the "
            f"checkpoint's input_dim {net.config.input_dim}"
        )
    paths, fmt = _data_paths_from(doc.get("data", {}))
    split_name = args.split if args.split is not None else str(doc.get("split", "test"))
    if split_name not in _SPLIT_NAMES:
        raise ConfigError(f"unknown split {split_name!r}")
    dataset = _load_dataset_from_paths(paths, fmt, required=(split_name,))
    instances = dataset.split(split_name)

    approach_name = args.approach or doc.get("approach") or _default_approach_for(net)
    approach = _approach_from(approach_name, dataset.annotator_count, args.a)
    if approach.variant in (Approach.SSF, Approach.STEP_OVER_SIGMOID) and dataset.annotator_count is None:
        raise ConfigError(
            f"approach {approach_name!r} requires a constant annotator count, but the "
            f"dataset's count varies or is unknown"
        )
    head_activation = net.config.output_activation
    if (
        approach.variant is Approach.SSF
        and isinstance(head_activation, SsfParams)
        and dataset.annotator_count != head_activation.a
    ):
        raise AnnotatorMismatchError(
            f"head expects a={head_activation.a} annotators but the "
            f"dataset has annotator_count={dataset.annotator_count}"
        )

    report = evaluate(net, approach, instances, featurizer)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        report_doc = {"split": split_name, "approach": approach_name, **report.to_dict()}
        with open(out_dir / "evaluation_report.json", "w", encoding="utf-8") as handle:
            json.dump(report_doc, handle, indent=2, sort_keys=True)
            handle.write("\n")
    if args.dump is not None:
        with open(args.dump, "w", encoding="utf-8") as handle:
            for inst in instances:
                soft = predict_soft(net, approach, featurize(featurizer, inst.text))
                record = {
                    "id": inst.id,
                    "soft": soft,
                    "hard": soft_to_hard(soft),
                    "target_soft": inst.soft_label,
                }
                handle.write(json.dumps(record) + "\n")
    print(f"{split_name} [{approach_name}] {report.summary_line()}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    doc = _read_config_file(args.config)
    checkpoint = load_checkpoint(args.checkpoint)
    net = checkpoint.network
    featurizer = _featurizer_from(doc.get("featurizer", {}))
    if featurizer.dimension != net.config.input_dim:
        raise ConfigError(
            f"featurizer dimension {featurizer.dimension} does not match the "
            f"checkpoint's input_dim {net.config.input_dim}"
        )
    try:
        fmt = DatasetFormat(args.format)
    except ValueError as exc:
        raise ConfigError(f"unknown dataset format {args.format!r}") from exc
    instances = load_split(args.data, fmt)
    counts = {len(inst.annotations) for inst in instances if inst.annotations is not None}
    annotator_count = counts.pop() if len(counts) == 1 else None
    approach_name = args.approach or doc.get("approach") or _default_approach_for(net)
    approach = _approach_from(approach_name, annotator_count, args.a)

    handle = open(args.out, "w", encoding="utf-8") if args.out is not None else sys.stdout
    try:
        for inst in instances:
            soft = predict_soft(net, approach, featurize(featurizer, inst.text))
            record = {"id": inst.id, "soft": soft, "hard": soft_to_hard(soft)}
            handle.write(json.dumps(record) + "\n")
    finally:
        if handle is not sys.stdout:
            handle.close()
    return EXIT_OK


def _cmd_plot_activation(args) -> int:
    if args.samples < 2:
        raise ConfigError(f"--samples must be at least 2, got {args.samples}")
    if args.xmax <= args.xmin:
        raise ConfigError(f"--xmax must exceed --xmin, got [{args.xmin}, {args.xmax}]")
    xs = np.linspace(args.xmin, args.xmax, args.samples)
    derivative = None
    if args.approach == "ssf":
        params = SsfParams(a=args.a, theta=args.theta, tail_mode=TailMode(args.tail or "paper"))
        ys = ssf_value(params, xs)
        if args.derivative:
            derivative = ssf_derivative(params, xs)
    elif args.approach == "sigmoid":
        if args.derivative:
            raise ConfigError("--derivative is only available for the ssf curve")
        ys = widened_sigmoid_value(SigmoidParams(widening=args.widening), xs)
    elif args.approach == "step":
        if args.derivative:
            raise ConfigError("--derivative is only available for the ssf curve")
        ys = step_quantize(StepGrid(args.a), xs)
    else:
        raise ConfigError(f"unknown curve {args.approach!r}, expected ssf, sigmoid, or step")

    with open(args.out, "w", encoding="utf-8") as handle:
        for index in range(args.samples):
            # plain float repr: shortest digits that round-trip float64
            row = f"{float(xs[index])!r} {float(ys[index])!r}"
            if derivative is not None:
                row += f" {float(derivative[index])!r}"
            handle.write(row + "\n")
    print(f"wrote {args.samples} samples of the {args.approach} curve to {args.out}")
    return EXIT_OK


def _cmd_synth_data(args) -> int:
    dataset = synthesize_dataset(
        n_train=args.n_train,
        n_val=args.n_val,
        n_test=args.n_test,
        a=args.a,
        seed=args.seed if args.seed is not None else 0,
        noise=args.noise,
    )
    try:
        fmt = DatasetFormat(args.format)
    except ValueError as exc:
        raise ConfigError(f"unknown dataset format {args.format!r}") from exc
    paths = save_dataset(dataset, args.out, fmt)
    print(
        f"wrote synthetic dataset (a={args.a}, "
        f"{args.n_train}/{args.n_val}/{args.n_test} instances) to {args.out}: "
        + ", ".join(str(path.name) for path in paths.values())
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common_overrides(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--a", type=int, default=None, help="annotator count override")
    sub.add_argument("--theta", type=float, default=None, help="ssf tail slope override")
    sub.add_argument("--tail", choices=["paper", "continuous"], default=None, help="ssf tail mode override")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softstep",
        description="Soft-label disagreement learning with step-like output activations.",
    )
    commands = parser.add_subparsers(dest="command")

    p_train = commands.add_parser("train", help="train a head on a disagreement dataset")
    p_train.add_argument("--config", required=True, help="run config JSON file")
    p_train.add_argument("--seed", type=int, default=None, help="seed override")
    p_train.add_argument("--out", default=None, help="output directory override")
    _add_common_overrides(p_train)
    p_train.set_defaults(handler=_cmd_train)

    p_eval = commands.add_parser("evaluate", help="evaluate a checkpoint on one split")
    p_eval.add_argument("--config", required=True, help="run config JSON file")
    p_eval.add_argument("--checkpoint", default=None, help="checkpoint file (default: <out_dir>/checkpoint.json)")
    p_eval.add_argument("--split", choices=_SPLIT_NAMES, default=None, help="split to score (default from config, else test)")
    p_eval.add_argument("--approach", choices=["sigmoid", "ssf", "step"], default=None)
    p_eval.add_argument("--out", default=None, help="directory for evaluation_report.json")
    p_eval.add_argument("--dump", default=None, help="write per-instance predictions to this JSONL file")
    p_eval.add_argument("--a", type=int, default=None, help="grid size override for the step approach")
    p_eval.set_defaults(handler=_cmd_evaluate, theta=None, tail=None)

    p_pred = commands.add_parser("predict", help="per-instance soft and hard predictions")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--data", required=True, help="split file to predict on")
    p_pred.add_argument("--format", choices=["json", "csv"], default="json")
    p_pred.add_argument("--config", default=None, help="run config JSON file (for featurizer settings)")
    p_pred.add_argument("--approach", choices=["sigmoid", "ssf", "step"], default=None)
    p_pred.add_argument("--a", type=int, default=None, help="grid size override for the step approach")
    p_pred.add_argument("--out", default=None, help="write JSONL here instead of stdout")
    p_pred.set_defaults(handler=_cmd_predict, theta=None, tail=None)

    p_plot = commands.add_parser("plot-activation", help="sample an activation curve to a text file")
    p_plot.add_argument("--approach", required=True, choices=["ssf", "sigmoid", "step"], help="curve to sample")
    p_plot.add_argument("--widening", type=float, default=5.0, help="sigmoid widening divisor")
    p_plot.add_argument("--xmin", type=float, default=-0.5)
    p_plot.add_argument("--xmax", type=float, default=1.5)
    p_plot.add_argument("--samples", type=int, default=256)
    p_plot.add_argument("--derivative", action="store_true", help="emit a third column with the ssf derivative")
    p_plot.add_argument("--out", required=True, help="output text file (rows: x y [dy])")
    _add_common_overrides(p_plot)
    p_plot.set_defaults(handler=_cmd_plot_activation)
    p_plot.set_defaults(a=3, theta=0.05)

    p_synth = commands.add_parser("synth-data", help="generate a synthetic disagreement dataset")
    p_synth.add_argument("--n-train", type=int, default=400)
    p_synth.add_argument("--n-val", type=int, default=100)
    p_synth.add_argument("--n-test", type=int, default=100)
    p_synth.add_argument("--a", type=int, default=3)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--noise", type=float, default=0.0)
    p_synth.add_argument("--format", choices=["json", "csv"], default="json")
    p_synth.add_argument("--out", required=True, help="output directory for the three split files")
    p_synth.set_defaults(handler=_cmd_synth_data)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "handler"):
        parser.print_help()
        return EXIT_CONFIG
    try:
        return args.handler(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except NumericError as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        return _fail(EXIT_DATA, exc)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
