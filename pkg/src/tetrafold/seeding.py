"""Deterministic fan-out of one root seed into per-stage generators."""

from __future__ import annotations

import hashlib

import numpy as np


def stage_seed(root: int, *names: object) -> np.random.SeedSequence:
    """Seed sequence for the stage named by ``names`` under ``root``.

    Uses SHA-256 of the joined names instead of ``hash()`` so seeds are stable
    across processes.
    """
    if root < 0:
        raise ValueError("root seed must be >= 0")
    digest = hashlib.sha256("/".join(str(n) for n in names).encode()).digest()
    return np.random.SeedSequence([int(root), int.from_bytes(digest[:8], "little")])


def stage_rng(root: int, *names: object) -> np.random.Generator:
    return np.random.default_rng(stage_seed(root, *names))
