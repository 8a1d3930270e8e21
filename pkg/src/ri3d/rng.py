"""SplitMix64 stream with a pinned float and Gaussian mapping.

Everything random in the package (augmentation, weight init, synthetic data)
draws from this stream so outputs are reproducible bit for bit.
"""

import math

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
_TWO64 = float(2 ** 64)
_BELOW_ONE = math.nextafter(1.0, 0.0)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _box_muller(u1: float, u2: float) -> float:
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


class RngStream:
    """Single-owner SplitMix64 generator.

    ``next_u64`` is the reference scalar path; the ``*_array`` methods compute
    the same values vectorized (the state advances by a constant, so block
    ``k`` of the stream is ``mix(state + k * GAMMA)``).
    """

    def __init__(self, seed: int = 0):
        self.state = int(seed) & MASK64

    @classmethod
    def for_sample(cls, base_seed: int, sample_index: int) -> "RngStream":
        """Independent stream for parallel work item ``sample_index``."""
        return cls(_mix((int(base_seed) + (int(sample_index) + 1) * GAMMA) & MASK64))

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def uniform(self) -> float:
        # output / 2**64 can round up to 1.0 for the top 2**10 outputs; keep [0, 1)
        return min(float(self.next_u64()) / _TWO64, _BELOW_ONE)

    def gaussian(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return _box_muller(u1, u2)

    def u64_array(self, size: int) -> np.ndarray:
        steps = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + size * GAMMA) & MASK64
        return z

    def uniform_array(self, size: int) -> np.ndarray:
        u = self.u64_array(size).astype(np.float64) / _TWO64
        return np.minimum(u, _BELOW_ONE)

    def gaussian_array(self, size: int) -> np.ndarray:
        """``size`` normals, each consuming two consecutive uniforms."""
        u = self.uniform_array(2 * size).tolist()
        # libm log/cos rather than numpy's SIMD variants, which may differ in the last bit
        return np.fromiter(
            (_box_muller(u[i], u[i + 1]) for i in range(0, 2 * size, 2)),
            dtype=np.float64, count=size,
        )


def partial_fisher_yates(n: int, m: int, rng: RngStream) -> np.ndarray:
    """First ``m`` slots of a Fisher-Yates shuffle of ``range(n)``.

    Slot ``i`` swaps with ``i + floor(u_i * (n - i))``; one uniform per slot.
    """
    perm = list(range(n))
    u = rng.uniform_array(m).tolist()
    for i in range(m):
        j = i + int(u[i] * (n - i))
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm[:m], dtype=np.int64)
