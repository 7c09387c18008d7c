"""Counter-based random numbers for reproducible parallel simulation.

Every random quantity consumed by a chain is a pure function of
``(seed, chain_index, step_index)``: one Philox4x64-10 block per chain step,
with the chain and step indices placed in the counter.  Draws therefore do
not depend on scheduling, sharding or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Philox4x64 round multipliers and Weyl key increments (Random123 constants).
PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
PHILOX_M1 = np.uint64(0xCA5A826395121157)
PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)

_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)

#: Number of 64-bit words produced per chain step and their meaning.
#: word 0 -> uniform deciding whether the step contains a jump
#: word 1 -> sign bits for the Euler noise (bit j -> xi_j, bit d -> eta)
#: word 2 -> uniform for the truncated-exponential step length
#: word 3 -> uniform for the jump-size quantile
WORDS_PER_STEP = 4


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full 64x64 -> 128 bit product via 32-bit limbs; returns (hi, lo)."""
    a_lo = a & _MASK32
    a_hi = a >> _SH32
    b_lo = b & _MASK32
    b_hi = b >> _SH32
    hi_lo = a_hi * b_lo
    cross = ((a_lo * b_lo) >> _SH32) + (hi_lo & _MASK32) + a_lo * b_hi
    hi = a_hi * b_hi + (hi_lo >> _SH32) + (cross >> _SH32)
    return hi, a * b


def philox4x64(
    c0: np.ndarray,
    c1: np.ndarray,
    c2: np.ndarray,
    c3: np.ndarray,
    key0: int,
    key1: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One Philox4x64-10 block per counter; all inputs uint64, vectorized.

    The implementation is checked bit-for-bit against ``numpy.random.Philox``
    in the test suite.
    """
    x0 = np.asarray(c0, dtype=np.uint64)
    x1 = np.asarray(c1, dtype=np.uint64)
    x2 = np.asarray(c2, dtype=np.uint64)
    x3 = np.asarray(c3, dtype=np.uint64)
    k0 = np.uint64(key0)
    k1 = np.uint64(key1)
    with np.errstate(over="ignore"):
        for _ in range(10):
            hi0, lo0 = _mulhilo(PHILOX_M0, x0)
            hi1, lo1 = _mulhilo(PHILOX_M1, x2)
            x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
            k0 = k0 + PHILOX_W0
            k1 = k1 + PHILOX_W1
    return x0, x1, x2, x3


def uniform_from_word(word: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles strictly inside (0, 1).

    Uses the top 53 bits, offset by half an ulp so 0.0 and 1.0 are excluded.
    """
    w = np.asarray(word, dtype=np.uint64)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def signs_from_word(word: int, count: int) -> np.ndarray:
    """Extract ``count`` independent +-1 values from the low bits of a word."""
    w = np.uint64(word)
    bits = (w >> np.arange(count, dtype=np.uint64)) & np.uint64(1)
    return 2.0 * bits.astype(np.float64) - 1.0


@dataclass(frozen=True)
class StepRandoms:
    """Raw random material for one chain step."""

    u_bernoulli: float
    u_step: float
    u_jump: float
    xi: np.ndarray
    eta: float


class ChainStream:
    """Random stream of a single chain, identified by ``(seed, chain_index)``.

    Streams with distinct chain indices are independent substreams of the
    same seed; the draws for step ``k`` may be regenerated at any time.
    """

    def __init__(self, seed: int, chain_index: int):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not 0 <= int(chain_index) < 2**64:
            raise ValueError("chain_index must fit in an unsigned 64-bit integer")
        self.seed = int(seed)
        self.chain_index = int(chain_index)

    def step_words(self, k: int) -> tuple[int, int, int, int]:
        """The four raw 64-bit words of step ``k``."""
        c0 = np.uint64(self.chain_index)
        c1 = np.uint64(k)
        z = np.uint64(0)
        w0, w1, w2, w3 = philox4x64(c0, c1, z, z, self.seed)
        return int(w0), int(w1), int(w2), int(w3)

    def step_draws(self, k: int, dim: int) -> StepRandoms:
        """Uniforms and noise signs consumed by step ``k`` of a chain in R^dim."""
        w0, w1, w2, w3 = self.step_words(k)
        signs = signs_from_word(w1, dim + 1)
        return StepRandoms(
            u_bernoulli=float(uniform_from_word(np.uint64(w0))),
            u_step=float(uniform_from_word(np.uint64(w2))),
            u_jump=float(uniform_from_word(np.uint64(w3))),
            xi=signs[:dim],
            eta=float(signs[dim]),
        )
