"""Random-number plumbing.

All stochastic code in the package draws from numpy's PCG64 ``Generator``.
Reproducible fan-out (bootstrap replicates, Monte Carlo chunks) uses
``SeedSequence.spawn``: ``split(seed, n)`` returns ``n`` child seeds that are
deterministic functions of ``seed`` and the child index, independent of how
many children are consumed or in which order the work runs.
"""

from __future__ import annotations

import numpy as np

__all__ = ["generator", "split"]


def generator(seed=None) -> np.random.Generator:
    """Return a PCG64 Generator from None, an int, a SeedSequence, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def split(seed, n: int) -> list[np.random.SeedSequence]:
    """Deterministically split ``seed`` into ``n`` independent child seeds."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)
