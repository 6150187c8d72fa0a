"""Deterministic RNG stream derivation.

Every stochastic component derives its generator from a master seed plus a
tuple of string/number tags (mechanism name, feature index, tree index, ...).
Streams are independent of evaluation order, so per-feature or per-tree work
can be reordered or parallelized without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*tags) -> int:
    """Hash a tag tuple to a stable 64-bit seed (independent of process state)."""
    text = "\x1f".join(_canon(t) for t in tags)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(*tags) -> np.random.Generator:
    """Generator seeded from a tag tuple via :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(*tags))


def _canon(tag) -> str:
    if isinstance(tag, (bool, np.bool_)):
        return f"b:{int(tag)}"
    if isinstance(tag, (int, np.integer)):
        return f"i:{int(tag)}"
    if isinstance(tag, (float, np.floating)):
        return f"f:{float(tag)!r}"
    if isinstance(tag, str):
        return f"s:{tag}"
    raise TypeError(f"unhashable rng tag type: {type(tag)!r}")
