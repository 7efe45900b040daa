"""Seeded PCG32 streams shared by the Python and compiled simulator kernels.

Both kernels must consume random numbers from the exact same sequences so that
a run is bit-identical regardless of backend.  numpy's generators cannot be
advanced cheaply from C without tying the build to numpy internals, so we use
PCG32 (64-bit state, 32-bit output), which is ~10 lines in either language.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1
PCG_MULT = 6364136223846793005
INV32 = 1.0 / 4294967296.0  # 2**-32, exact

# Named substream ids. One independent PCG32 stream per source of randomness,
# so e.g. changing the arrival process does not shift the channel outcomes.
STREAM_ARRIVALS = 0
STREAM_DEADLINES = 1
STREAM_CHANNEL = 2
STREAM_POLICY = 3
N_STREAMS = 4


def mix64(x: int) -> int:
    """splitmix64 finalizer; used to derive per-stream seeds."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def stream_state(seed: int, stream: int) -> tuple[int, int]:
    """Initial (state, inc) for the given master seed and substream id."""
    initstate = mix64((seed & MASK64) + 0x9E3779B97F4A7C15 * (stream + 1))
    initseq = mix64(initstate ^ 0xDA3E39CB94B95BDB)
    inc = ((initseq << 1) | 1) & MASK64
    state = (inc + initstate) & MASK64
    state = (state * PCG_MULT + inc) & MASK64
    return state, inc


def pcg32_next(state: int, inc: int) -> tuple[int, int]:
    """One PCG32 step: returns (32-bit output, new state)."""
    x = state
    state = (x * PCG_MULT + inc) & MASK64
    xorshifted = (((x >> 18) ^ x) >> 27) & MASK32
    rot = x >> 59
    out = ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & MASK32
    return out, state


class Pcg32:
    """Convenience wrapper for one substream (used outside the hot kernels)."""

    __slots__ = ("state", "inc")

    def __init__(self, seed: int, stream: int = 0):
        self.state, self.inc = stream_state(seed, stream)

    def next_uint32(self) -> int:
        out, self.state = pcg32_next(self.state, self.inc)
        return out

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 32-bit resolution."""
        return self.next_uint32() * INV32
