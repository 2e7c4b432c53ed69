"""Seed-stream management.

Every randomized operation draws from its own numpy Generator, derived from
(user seed, stream id[, iteration]).  Streams are independent, so e.g. the
bootstrap in the CLT diagnostic never perturbs scenario sampling, and
per-iteration substreams make parallel loops order-independent.
"""

from __future__ import annotations

import numpy as np

STREAM_SYNTH = 0
STREAM_HOUSEHOLD = 1
STREAM_BETA = 2
STREAM_PATHS = 3
STREAM_BOOTSTRAP = 4
STREAM_EXPERIMENT = 5


def stream_rng(seed: int, stream: int, iteration: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(stream), int(iteration))))
