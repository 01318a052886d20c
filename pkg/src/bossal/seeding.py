"""Deterministic derivation of 64-bit seeds.

Every random stream in the package is seeded through ``mix64``, which folds
an arbitrary sequence of integer words into a single 64-bit value with the
SplitMix64 finalizer.  Folding word by word (rather than hashing a string)
keeps the scheme easy to restate: two seed paths collide only if the
finalizer chain collides, and the chain is documented in docs/FORMATS.md so
runs can be replayed outside this codebase.
"""

MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    """SplitMix64 finalizer: bijective avalanche mix of one 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def mix64(*words: int) -> int:
    """Fold integer words into one 64-bit seed.

    Starting from zero, each word is added modulo 2**64 and the running
    state is passed through the SplitMix64 finalizer.  The result is
    order-sensitive, so ``mix64(a, b) != mix64(b, a)`` in general.

    Args:
        *words: one or more integers; negatives wrap modulo 2**64.

    Returns:
        An integer in [0, 2**64).
    """
    if not words:
        raise ValueError("mix64 requires at least one word")
    z = 0
    for w in words:
        z = splitmix64((z + (int(w) & MASK64)) & MASK64)
    return z
