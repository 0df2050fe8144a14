"""SplitMix64 PRNG, fully specified so seeded draws reproduce across platforms."""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; returns (new_state, 64-bit output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z ^= z >> 31
    return state, z


def uniform_index(seed: int, n: int) -> int:
    """Draw uniformly from 0..n-1 via rejection sampling on SplitMix64 outputs."""
    if n <= 0:
        raise ValueError("n must be positive")
    # Reject outputs in the final partial bucket so the draw is exactly uniform.
    bound = (1 << 64) - ((1 << 64) % n)
    state = seed & _MASK64
    while True:
        state, z = splitmix64_next(state)
        if z < bound:
            return z % n
