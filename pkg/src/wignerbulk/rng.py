"""Deterministic per-sample random streams.

Every Monte Carlo sample draws from its own Philox stream keyed on
``(root seed, experiment id, sample index)``, so a sample's content does not
depend on which worker produced it or in which order.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["experiment_key", "sample_seedseq", "sample_streams", "stream"]


def experiment_key(experiment_id: str) -> int:
    """Stable 64-bit integer for an experiment id (``hash()`` is salted per process)."""
    digest = hashlib.sha256(experiment_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def sample_seedseq(seed: int, experiment_id: str, index: int) -> np.random.SeedSequence:
    if seed < 0 or index < 0:
        raise ValueError("seed and sample index must be non-negative")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(experiment_key(experiment_id), int(index)))


def stream(seedseq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seedseq))


def sample_streams(seed: int, experiment_id: str, index: int, count: int = 2) -> list[np.random.Generator]:
    """Independent generators for one sample: ``[matrix, ou_noise, ...]``."""
    children = sample_seedseq(seed, experiment_id, index).spawn(count)
    return [stream(ss) for ss in children]
