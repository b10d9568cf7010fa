"""Deterministic per-cell seed derivation.

``derive_seed(base, *parts)`` folds each part into a 64-bit state with the
SplitMix64 finalizer. Strings are first reduced with 64-bit FNV-1a over
their UTF-8 bytes, integers are taken modulo 2**64. The result is a pure
function of its arguments, so any (family, capacity, repeat) cell can be
re-run in isolation.
"""
from __future__ import annotations

MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK
    return h


def derive_seed(base: int, *parts) -> int:
    state = splitmix64(int(base) & MASK)
    for part in parts:
        value = fnv1a64(part) if isinstance(part, str) else int(part) & MASK
        state = splitmix64(state ^ value)
    return state
