"""Deterministic seed derivation.

Every random choice in the package flows from a single master seed.
Sub-components derive their own stream seed by hashing the master seed
together with a path of string/int labels, e.g.::

    derive_seed(42, "trainer", fold_j, spec_index)

The derivation uses BLAKE2b, so streams are stable across platforms,
Python versions, and process counts.  Two different label paths give
independent streams; the same path always gives the same stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, *labels) -> int:
    """Derive a 64-bit stream seed from ``master_seed`` and a label path."""
    key = ":".join([str(int(master_seed))] + [str(l) for l in labels])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & _MASK64


def rng_for(master_seed: int, *labels) -> np.random.Generator:
    """A ``numpy`` generator seeded from the derived stream seed."""
    return np.random.default_rng(derive_seed(master_seed, *labels))
