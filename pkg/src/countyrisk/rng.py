"""Seeded random streams.

Every stochastic routine draws from a ``numpy.random.Generator`` backed by
Philox-4x64, a counter-based bit generator whose output is fully specified
and identical on every platform. Independent streams are keyed by a tuple of
non-negative integers, e.g. ``(seed, chain_index)``, through ``SeedSequence``
so that parallel work units never share state and results do not depend on
how work is scheduled.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


# stage tags keep the streams of different pipeline stages disjoint
MORAN = 1
GIBBS = 2
PREDICTIVE = 3
SURVEY = 4
CAR_FIELD = 5
REGRESSION = 6
FIXTURE = 7


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for ``seed`` and optional sub-stream ``keys``."""
    if seed is None:
        raise InputError("seed is mandatory")
    entropy = [int(seed), *map(int, keys)]
    if any(k < 0 for k in entropy):
        raise InputError("seed and stream keys must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
