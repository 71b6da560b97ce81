"""Deterministic sub-seed derivation.

One master seed reproduces an entire experiment. Every stochastic component
draws from a generator derived as ``SeedSequence([master, crc32(domain),
index])``, so independent components (state sampling, basis selection,
per-basis shot noise, per-repeat training, crossbar reads) never share a
stream and never depend on call order.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import ArgumentError


def derive_seed_sequence(master: int, domain: str, index: int = 0) -> np.random.SeedSequence:
    if master < 0:
        raise ArgumentError("master seed must be non-negative")
    if index < 0:
        raise ArgumentError("sub-seed index must be non-negative")
    tag = zlib.crc32(domain.encode("utf-8"))
    return np.random.SeedSequence([int(master), tag, int(index)])


def derive_rng(master: int, domain: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed_sequence(master, domain, index))


def derive_fast_rng(master: int, domain: str, index: int = 0) -> np.random.Generator:
    """SFC64-backed generator for bulk draws (parameter initialization)."""
    return np.random.Generator(np.random.SFC64(derive_seed_sequence(master, domain, index)))


def derive_seed(master: int, domain: str, index: int = 0) -> int:
    """A plain 64-bit integer sub-seed, for APIs that take one."""
    state = derive_seed_sequence(master, domain, index).generate_state(1, np.uint64)
    return int(state[0])
