"""Deterministic derivation of per-task random streams.

Every command takes one top-level seed; every task that needs randomness
derives its own labelled stream from it. The derivation depends only on
the seed and the labels, never on execution order, so parallel schedules
cannot change results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"negative label {label!r} not allowed in seed path")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def child_seed(seed: int, *labels) -> np.random.SeedSequence:
    """Derive a SeedSequence for the task identified by `labels`."""
    return np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(_label_key(lab) for lab in labels)
    )


def child_rng(seed: int, *labels) -> np.random.Generator:
    """Generator seeded from the labelled stream."""
    return np.random.default_rng(child_seed(seed, *labels))


def child_int(seed: int, *labels) -> int:
    """64-bit integer seed for the labelled stream, for passing downward."""
    return int(child_seed(seed, *labels).generate_state(1, np.uint64)[0])
