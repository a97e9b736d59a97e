"""Seeded random streams.

A master seed is split with ``numpy.random.SeedSequence.spawn`` into one
child per named stream, always in the order of ``STREAM_NAMES``.  Each
process draws only from its own stream, so changing how many draws one
process makes never shifts another process's draws.

Replication ``r`` of an experiment with master seed ``s`` uses the r-th
child of ``SeedSequence(s).spawn(n)``; the per-run streams are then split
from that child as above.
"""

from dataclasses import dataclass

import numpy as np

STREAM_NAMES = (
    "arrivals",
    "departures",
    "targets",
    "lifetimes",
    "latent",
    "rewards",
    "policy",
)


@dataclass(frozen=True)
class Streams:
    arrivals: np.random.Generator
    departures: np.random.Generator
    targets: np.random.Generator
    lifetimes: np.random.Generator
    latent: np.random.Generator
    rewards: np.random.Generator
    policy: np.random.Generator


def make_streams(seed) -> Streams:
    """Split ``seed`` (int, SeedSequence or None) into named generators."""
    if isinstance(seed, Streams):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawn() advances the parent's child counter
        ss = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(STREAM_NAMES))
    return Streams(**{name: np.random.default_rng(c) for name, c in zip(STREAM_NAMES, children)})


def replication_seeds(master_seed: int, n: int) -> list:
    return np.random.SeedSequence(master_seed).spawn(n)
