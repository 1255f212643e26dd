"""Deterministic RNG derivation from integer context keys."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_rng(*parts: int) -> np.random.Generator:
    """Build a Generator keyed by integer context parts (seed, epoch, ...).

    Parts may be negative; each is mapped to its unsigned 64-bit word so the
    underlying SeedSequence accepts it. Equal parts always yield the same
    stream, distinct parts effectively independent ones.
    """
    return np.random.default_rng(np.random.SeedSequence([p & _MASK64 for p in parts]))
