"""Named random streams.

Every stochastic draw comes from a generator keyed by ``(seed, purpose, agent)``,
so streams are independent of each other and of the order in which agents or
trials are evaluated.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, agent: int | None = None) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    words = [int(seed), _tag(purpose), 0 if agent is None else int(agent) + 1]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def agent_streams(seed: int, purpose: str, n: int) -> list[np.random.Generator]:
    return [stream(seed, purpose, i) for i in range(n)]
