"""Disagreement datasets: loading, soft labels, hashing featurizer, synthesis.

An instance carries the raw annotator votes (binary, one per annotator) and
the derived soft label, the fraction of positive votes. Datasets with a
constant number of annotators expose that count, which the grid-based
activations require. Text is turned into fixed-width vectors by a seeded
feature-hashing bag of unigrams/bigrams; this is a deliberately simple,
deterministic stand-in for a pretrained text encoder.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import derive_rng

__all__ = [
    "DataError",
    "Instance",
    "DisagreementDataset",
    "FeaturizerConfig",
    "DatasetFormat",
    "derive_soft_label",
    "featurize",
    "load_split",
    "load_dataset",
    "save_split",
    "save_dataset",
    "synthesize_dataset",
]

SOFT_LABEL_ATOL = 1e-9
_SPLIT_NAMES = ("train", "validation", "test")


class DataError(Exception):
    """A dataset file or its contents are invalid."""


class DatasetFormat(enum.Enum):
    JSON = "json"
    CSV = "csv"


def derive_soft_label(annotations) -> float:
    """Fraction of positive votes among the annotations."""
    votes = list(annotations)
    if not votes:
        raise ValueError("cannot derive a soft label from an empty annotation sequence")
    for vote in votes:
        if vote not in (0, 1):
            raise ValueError(f"annotations must be 0 or 1, got {vote!r}")
    return sum(votes) / len(votes)


@dataclass(frozen=True)
class Instance:
    """One text example with its annotator votes and derived labels."""

    id: str
    text: str
    soft_label: float
    annotations: tuple[int, ...] | None = None
    hard_label: int | None = None

    def __post_init__(self) -> None:
        if self.annotations is not None:
            raw = tuple(self.annotations)
            for vote in raw:
                if vote not in (0, 1):
                    raise ValueError(f"annotations must be 0 or 1, got {vote!r}")
            votes = tuple(int(v) for v in raw) if raw else None
            object.__setattr__(self, "annotations", votes)
        if not math.isfinite(self.soft_label) or not (0.0 <= self.soft_label <= 1.0):
            raise ValueError(f"soft_label must lie in [0, 1], got {self.soft_label!r}")
        if self.annotations is not None:
            derived = derive_soft_label(self.annotations)
            if abs(derived - self.soft_label) > SOFT_LABEL_ATOL:
                raise ValueError(
                    f"soft_label {self.soft_label!r} disagrees with the "
                    f"annotation fraction {derived!r}"
                )
        if self.hard_label is not None and self.hard_label not in (0, 1):
            raise ValueError(f"hard_label must be 0 or 1, got {self.hard_label!r}")


@dataclass(frozen=True)
class DisagreementDataset:
    """Train/validation/test splits plus the constant annotator count, if any."""

    train: tuple[Instance, ...]
    validation: tuple[Instance, ...]
    test: tuple[Instance, ...]
    annotator_count: int | None

    @classmethod
    def from_splits(cls, train, validation, test) -> "DisagreementDataset":
        """Assemble a dataset, checking id disjointness and annotator constancy.

        annotator_count is set only when at least one instance carries
        annotations and every annotated instance has the same number of them.
        """
        splits = (tuple(train), tuple(validation), tuple(test))
        seen: dict[str, str] = {}
        for name, instances in zip(_SPLIT_NAMES, splits):
            for inst in instances:
                if inst.id in seen:
                    raise DataError(
                        f"instance id {inst.id!r} appears in both "
                        f"{seen[inst.id]!r} and {name!r} splits"
                    )
                seen[inst.id] = name
        counts = {
            len(inst.annotations)
            for instances in splits
            for inst in instances
            if inst.annotations is not None
        }
        count = counts.pop() if len(counts) == 1 else None
        return cls(train=splits[0], validation=splits[1], test=splits[2], annotator_count=count)

    def split(self, name: str) -> tuple[Instance, ...]:
        if name not in _SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}, expected one of {_SPLIT_NAMES}")
        return getattr(self, name)


# ---------------------------------------------------------------------------
# Feature hashing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeaturizerConfig:
    """Seeded hashing bag-of-ngrams over a power-of-two feature space."""

    dimension: int = 16384
    ngram_orders: frozenset[int] = frozenset((1, 2))
    lowercase: bool = True
    hash_seed: int = 0

    def __post_init__(self) -> None:
        dim = self.dimension
        if int(dim) != dim or dim < 2 or dim & (dim - 1) != 0:
            raise ValueError(f"dimension must be a power of two >= 2, got {dim!r}")
        orders = frozenset(self.ngram_orders)
        if not orders <= {1, 2}:
            raise ValueError(f"ngram_orders must be a subset of {{1, 2}}, got {self.ngram_orders!r}")
        object.__setattr__(self, "ngram_orders", orders)


def _strip_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split on Unicode whitespace and strip leading/trailing punctuation."""
    if lowercase:
        text = text.lower()
    tokens = []
    for raw in text.split():
        token = _strip_punctuation(raw)
        if token:
            tokens.append(token)
    return tokens


def _bucket(payload: bytes, key: bytes, dimension: int) -> int:
    digest = hashlib.blake2b(payload, digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little") & (dimension - 1)


def featurize(config: FeaturizerConfig, text: str) -> np.ndarray:
    """Hash unigram/bigram counts into a fixed-width, L2-normalized vector.

    Deterministic for a fixed config; empty text maps to the zero vector.
    """
    tokens = tokenize(text, lowercase=config.lowercase)
    key = (config.hash_seed & ((1 << 64) - 1)).to_bytes(8, "little")
    vector = np.zeros(config.dimension)
    if 1 in config.ngram_orders:
        for token in tokens:
            vector[_bucket(b"1\x00" + token.encode("utf-8"), key, config.dimension)] += 1.0
    if 2 in config.ngram_orders:
        for first, second in zip(tokens, tokens[1:]):
            payload = b"2\x00" + first.encode("utf-8") + b"\x1f" + second.encode("utf-8")
            vector[_bucket(payload, key, config.dimension)] += 1.0
    norm = np.linalg.norm(vector)
    if norm > 0.0:
        vector /= norm
    return vector


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_CSV_COLUMNS = ["id", "text", "annotations", "soft_label", "hard_label"]


def _soft_label_from_value(value, instance_id: str) -> float:
    if isinstance(value, dict):
        try:
            p0, p1 = float(value["0"]), float(value["1"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(
                f"instance {instance_id!r}: soft_label dict must map '0' and '1' "
                f"to numbers, got {value!r}"
            ) from exc
        if abs(p0 + p1 - 1.0) > 1e-6:
            raise DataError(
                f"instance {instance_id!r}: soft_label probabilities sum to "
                f"{p0 + p1!r}, expected 1"
            )
        return p1
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise DataError(f"instance {instance_id!r}: unsupported soft_label value {value!r}")


def _build_instance(
    instance_id: str,
    text: str,
    annotations: list[int] | None,
    soft_label: float | None,
    hard_label: int | None,
) -> Instance:
    if soft_label is None:
        if not annotations:
            raise DataError(
                f"instance {instance_id!r}: needs a soft_label or a non-empty "
                f"annotation list"
            )
        soft_label = derive_soft_label(annotations)
    try:
        return Instance(
            id=instance_id,
            text=text,
            soft_label=soft_label,
            annotations=tuple(annotations) if annotations else None,
            hard_label=hard_label,
        )
    except ValueError as exc:
        raise DataError(f"instance {instance_id!r}: {exc}") from exc


def _load_json_split(path: Path) -> list[Instance]:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: top level must be an object keyed by instance id")
    instances = []
    for instance_id, fields in doc.items():
        if not isinstance(fields, dict):
            raise DataError(f"instance {instance_id!r}: entry must be an object")
        if "text" not in fields or not isinstance(fields["text"], str):
            raise DataError(f"instance {instance_id!r}: missing text")
        annotations = fields.get("annotations")
        if annotations is not None:
            if not isinstance(annotations, list) or any(v not in (0, 1) for v in annotations):
                raise DataError(
                    f"instance {instance_id!r}: annotations must be a list of 0/1, "
                    f"got {annotations!r}"
                )
        soft = fields.get("soft_label")
        soft_value = _soft_label_from_value(soft, instance_id) if soft is not None else None
        hard = fields.get("hard_label")
        if hard is not None:
            if hard not in (0, 1):
                raise DataError(f"instance {instance_id!r}: hard_label must be 0 or 1, got {hard!r}")
            hard = int(hard)
        instances.append(_build_instance(instance_id, fields["text"], annotations, soft_value, hard))
    return instances


def _load_csv_split(path: Path) -> list[Instance]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: missing CSV header row") from None
        if header != _CSV_COLUMNS:
            raise DataError(f"{path}: CSV header must be {_CSV_COLUMNS}, got {header}")
        instances = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(_CSV_COLUMNS):
                raise DataError(f"{path}:{line_no}: expected {len(_CSV_COLUMNS)} columns, got {len(row)}")
            instance_id, text, ann_field, soft_field, hard_field = row
            annotations = None
            if ann_field:
                try:
                    annotations = [int(part) for part in ann_field.split("|")]
                except ValueError as exc:
                    raise DataError(f"instance {instance_id!r}: bad annotations {ann_field!r}") from exc
                if any(v not in (0, 1) for v in annotations):
                    raise DataError(f"instance {instance_id!r}: annotations must be 0/1, got {ann_field!r}")
            soft_value = None
            if soft_field:
                try:
                    soft_value = float(soft_field)
                except ValueError as exc:
                    raise DataError(f"instance {instance_id!r}: bad soft_label {soft_field!r}") from exc
            hard = None
            if hard_field:
                if hard_field not in ("0", "1"):
                    raise DataError(f"instance {instance_id!r}: hard_label must be 0 or 1, got {hard_field!r}")
                hard = int(hard_field)
            instances.append(_build_instance(instance_id, text, annotations, soft_value, hard))
    return instances


def load_split(path: str | Path, format: DatasetFormat = DatasetFormat.JSON) -> list[Instance]:
    """Load one split file in the given format."""
    path = Path(path)
    if format is DatasetFormat.JSON:
        return _load_json_split(path)
    if format is DatasetFormat.CSV:
        return _load_csv_split(path)
    raise ValueError(f"unsupported dataset format {format!r}")


def load_dataset(path: str | Path, format: DatasetFormat = DatasetFormat.JSON) -> DisagreementDataset:
    """Load a dataset from a directory holding train/validation/test split files.

    Files are named ``train.json``/``validation.json``/``test.json`` (or
    ``.csv``). A missing split file is treated as an empty split.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise DataError(f"{directory}: expected a dataset directory with per-split files")
    splits = []
    for name in _SPLIT_NAMES:
        split_path = directory / f"{name}.{format.value}"
        splits.append(load_split(split_path, format) if split_path.exists() else [])
    return DisagreementDataset.from_splits(*splits)


def _instance_to_json(inst: Instance) -> dict:
    fields: dict = {"text": inst.text, "soft_label": inst.soft_label}
    if inst.annotations is not None:
        fields["annotations"] = list(inst.annotations)
    if inst.hard_label is not None:
        fields["hard_label"] = inst.hard_label
    return fields


def save_split(instances, path: str | Path, format: DatasetFormat = DatasetFormat.JSON) -> None:
    """Write one split file; the inverse of :func:`load_split`."""
    path = Path(path)
    if format is DatasetFormat.JSON:
        doc = {inst.id: _instance_to_json(inst) for inst in instances}
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2, sort_keys=True, ensure_ascii=False)
            handle.write("\n")
        return
    if format is DatasetFormat.CSV:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(_CSV_COLUMNS)
            for inst in instances:
                ann = "|".join(str(v) for v in inst.annotations) if inst.annotations else ""
                hard = "" if inst.hard_label is None else str(inst.hard_label)
                writer.writerow([inst.id, inst.text, ann, repr(inst.soft_label), hard])
        return
    raise ValueError(f"unsupported dataset format {format!r}")


def save_dataset(
    dataset: DisagreementDataset, directory: str | Path, format: DatasetFormat = DatasetFormat.JSON
) -> dict[str, Path]:
    """Write the three split files into ``directory``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in _SPLIT_NAMES:
        split_path = directory / f"{name}.{format.value}"
        save_split(dataset.split(name), split_path, format)
        paths[name] = split_path
    return paths


# ---------------------------------------------------------------------------
# Synthetic fixture generation
# ---------------------------------------------------------------------------

_POSITIVE_TOKENS = (
    "harsh", "rude", "foul", "grim", "cruel", "vile", "angry", "bitter",
    "bleak", "coarse", "crude", "sour", "toxic", "blunt", "shrill", "nasty",
)
_NEGATIVE_TOKENS = (
    "calm", "fair", "kind", "safe", "warm", "glad", "clear", "firm",
    "neat", "tidy", "sound", "bright", "plain", "crisp", "gentle", "mild",
)


def _synthesize_split(name: str, size: int, a: int, noise: float, rng: np.random.Generator) -> list[Instance]:
    hard_labels = np.zeros(size, dtype=np.int64)
    hard_labels[: size // 2] = 1
    hard_labels = hard_labels[rng.permutation(size)]
    positive_grid = [k for k in range(a + 1) if k / a > 0.5]
    negative_grid = [k for k in range(a + 1) if k / a <= 0.5]
    tokens_per_text = 4 * a

    instances = []
    for index in range(size):
        hard = int(hard_labels[index])
        k = int(rng.choice(positive_grid if hard else negative_grid))
        soft = k / a
        # 4*k of the 4*a tokens come from the positive pool, so the positive
        # token fraction equals the soft label exactly.
        from_positive = np.zeros(tokens_per_text, dtype=bool)
        from_positive[: 4 * k] = True
        from_positive = from_positive[rng.permutation(tokens_per_text)]
        if noise > 0.0:
            flips = rng.random(tokens_per_text) < noise
            from_positive = from_positive ^ flips
        words = [
            _POSITIVE_TOKENS[rng.integers(len(_POSITIVE_TOKENS))]
            if positive
            else _NEGATIVE_TOKENS[rng.integers(len(_NEGATIVE_TOKENS))]
            for positive in from_positive
        ]
        votes = np.zeros(a, dtype=np.int64)
        votes[:k] = 1
        votes = votes[rng.permutation(a)]
        instances.append(
            Instance(
                id=f"{name}-{index:05d}",
                text=" ".join(words),
                soft_label=soft,
                annotations=tuple(int(v) for v in votes),
                hard_label=hard,
            )
        )
    return instances


def synthesize_dataset(
    n_train: int,
    n_val: int,
    n_test: int,
    a: int,
    seed: int,
    noise: float = 0.0,
) -> DisagreementDataset:
    """Generate a deterministic two-pool token dataset with grid soft labels.

    Each text mixes tokens from a positive and a negative vocabulary pool in
    the exact proportion of its soft label, so a linear model can recover the
    label from hashed token counts. ``noise`` is the per-token probability of
    drawing from the wrong pool; labels stay exact. Hard classes are balanced
    by construction.
    """
    if int(a) != a or a < 1:
        raise ValueError(f"annotator count a must be a positive integer, got {a!r}")
    for label, value in (("n_train", n_train), ("n_val", n_val), ("n_test", n_test)):
        if int(value) != value or value < 1:
            raise ValueError(f"{label} must be a positive integer, got {value!r}")
    if not (0.0 <= noise < 1.0):
        raise ValueError(f"noise must lie in [0, 1), got {noise!r}")
    rng = derive_rng(seed)
    return DisagreementDataset.from_splits(
        _synthesize_split("train", n_train, a, noise, rng),
        _synthesize_split("validation", n_val, a, noise, rng),
        _synthesize_split("test", n_test, a, noise, rng),
    )
