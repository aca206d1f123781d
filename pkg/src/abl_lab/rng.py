"""xoshiro256** and splitmix64, bit-exact.

Seeding scheme (part of the simulator's reproducibility contract):

* chunk ``c`` of a run with 64-bit ``seed`` gets the child seed
  ``mix64(seed + (c + 1) * GOLDEN)``, where ``mix64`` is the splitmix64
  output finalizer and arithmetic is mod 2**64;
* the four xoshiro256** state words are the first four splitmix64 outputs
  of a splitmix64 generator whose state starts at the child seed;
* a uniform double is ``(next() >> 11) * 2**-53``.

The jitted kernels in :mod:`abl_lab.simulate` duplicate these functions with
numba types; this module is the plain-Python reference.
"""
from __future__ import annotations

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """Return (new_state, output)."""
    state = (state + GOLDEN) & MASK
    return state, mix64(state)


def chunk_seed(seed: int, chunk: int) -> int:
    return mix64((seed + (chunk + 1) * GOLDEN) & MASK)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK


class Xoshiro256ss:
    def __init__(self, seed: int | None = None, state: tuple[int, int, int, int] | None = None):
        if state is not None:
            self.s = [w & MASK for w in state]
        else:
            sm = check_seed(seed)
            s = []
            for _ in range(4):
                sm, out = splitmix64(sm)
                s.append(out)
            self.s = s
        if not any(self.s):
            raise ValueError("xoshiro256** state must not be all zero")

    def next(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK, 7) * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        return (self.next() >> 11) * 2.0**-53


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    if not 0 <= seed <= MASK:
        raise ValueError(f"seed {seed} is not an unsigned 64-bit integer")
    return seed
