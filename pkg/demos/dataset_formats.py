#!/usr/bin/env python3
"""Tour of the dataset schema and the hashing featurizer.

Builds a handful of instances by hand, writes them in both supported file
formats, loads them back, and shows what the featurizer does to a text.
"""

import tempfile
from pathlib import Path

import numpy as np

from softstep import (
    DatasetFormat,
    FeaturizerConfig,
    Instance,
    derive_soft_label,
    featurize,
    load_split,
    save_split,
    tokenize,
)

instances = [
    Instance(id="ex-1", text="This is fine, really.", soft_label=0.0,
             annotations=(0, 0, 0), hard_label=0),
    Instance(id="ex-2", text="Borderline phrasing, two of three flagged it.",
             soft_label=derive_soft_label([1, 1, 0]), annotations=(1, 1, 0), hard_label=1),
    # labels can also come in without raw votes
    Instance(id="ex-3", text="No vote record for this one.", soft_label=0.75),
]

workdir = Path(tempfile.mkdtemp(prefix="softstep_formats_"))
for fmt in (DatasetFormat.JSON, DatasetFormat.CSV):
    path = workdir / f"split.{fmt.value}"
    save_split(instances, path, fmt)
    loaded = load_split(path, fmt)
    assert loaded == instances
    print(f"{fmt.value}: wrote and re-read {len(loaded)} instances from {path}")

print("\nfile contents (json):")
print((workdir / "split.json").read_text())

config = FeaturizerConfig(dimension=64, hash_seed=1)
text = instances[1].text
tokens = tokenize(text)
vector = featurize(config, text)
print(f"tokenized {text!r} -> {tokens}")
print(f"featurized into {config.dimension} buckets: {np.count_nonzero(vector)} non-zero, "
      f"L2 norm {np.linalg.norm(vector):.6f}")
print("bucket indices:", np.flatnonzero(vector).tolist())

other_seed = FeaturizerConfig(dimension=64, hash_seed=2)
shared = set(np.flatnonzero(vector).tolist()) & set(np.flatnonzero(featurize(other_seed, text)).tolist())
print("same text, different hash seed shares buckets:", sorted(shared))
