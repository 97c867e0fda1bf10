"""Exact binary phases for the doubling map and dyadic quadrature grids.

With 64-bit floats a generic orbit of x -> 2x mod 1 collapses to 0 after at
most 53 steps, which silently corrupts every orbit average built on top of
it.  Phases are therefore stored as explicit bit vectors and the doubling
map is a lossless left shift.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class DepthExhaustedError(Exception):
    """No bits left: the requested orbit is longer than the stored phase."""


@dataclass(frozen=True, eq=False)
class DyadicPhase:
    """A phase in [0, 1) stored as binary digits, most significant first.

    The represented value is sum(bits[i] * 2**-(i+1)).  Callers must
    provision depth >= (iterations needed) + guard bits.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("phase bits must be 0 or 1")

    @property
    def depth(self) -> int:
        return len(self.bits)

    def as_fraction(self) -> Fraction:
        num = 0
        for b in self.bits:
            num = (num << 1) | b
        return Fraction(num, 1 << self.depth) if self.depth else Fraction(0)

    def is_zero(self) -> bool:
        return not any(self.bits)

    # Equality and ordering compare represented values exactly, so a phase
    # and the same phase with extra trailing zero bits are equal.
    def __eq__(self, other):
        if not isinstance(other, DyadicPhase):
            return NotImplemented
        return self.as_fraction() == other.as_fraction()

    def __lt__(self, other):
        return self.as_fraction() < other.as_fraction()

    def __hash__(self):
        return hash(self.as_fraction())

    def __repr__(self):
        return f"DyadicPhase(0.{''.join(map(str, self.bits))}b)"

    @classmethod
    def from_fraction(cls, value, depth: int) -> "DyadicPhase":
        """Exact construction from a dyadic rational in [0, 1)."""
        frac = Fraction(value)
        if not 0 <= frac < 1:
            raise ValueError("phase value must lie in [0, 1)")
        scaled = frac * (1 << depth)
        if scaled.denominator != 1:
            raise ValueError(f"{value} is not a dyadic rational at depth {depth}")
        num = scaled.numerator
        bits = tuple((num >> (depth - 1 - i)) & 1 for i in range(depth))
        return cls(bits)


def double(x: DyadicPhase) -> DyadicPhase:
    """Apply the doubling map once: an exact left shift of the bits.

    Zero is a fixed point and keeps its depth; any other phase must have at
    least one bit to shift out.
    """
    if x.is_zero():
        return x
    if x.depth < 1:
        raise DepthExhaustedError("phase has no bits left")
    return DyadicPhase(x.bits[1:])


def iterate(x: DyadicPhase, k: int) -> DyadicPhase:
    """Return T^k x exactly (k left shifts)."""
    if k < 0:
        raise ValueError("iteration count must be >= 0")
    y = x
    for _ in range(k):
        y = double(y)
    return y


def random_phase(seed: int, depth: int) -> DyadicPhase:
    """Draw `depth` independent uniform bits from a seeded generator."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=depth, dtype=np.uint8)
    return DyadicPhase(tuple(int(b) for b in bits))


def to_real(x: DyadicPhase) -> float:
    """Nearest float to the represented value (exact when depth <= 53)."""
    num = 0
    for b in x.bits:
        num = (num << 1) | b
    return num / (1 << x.depth) if x.depth else 0.0


def random_bit_matrix(seed: int, samples: int, depth: int) -> np.ndarray:
    """Bit rows for a batch of independent random phases (one RNG stream)."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(samples, depth), dtype=np.uint8)


def orbit_reals(bits: np.ndarray, n: int) -> np.ndarray:
    """Float values of T^k applied to the phases encoded in bit rows.

    Returns an array of shape (samples, n) whose column k holds the value of
    the k-th iterate.  Column k is computed from bits k..depth-1 alone, so no
    orbit ever collapses the way a float-doubled orbit would; the only float
    effect is a final sub-ulp rounding of each value.
    """
    samples, depth = bits.shape
    if n > depth:
        raise DepthExhaustedError(f"need {n} iterates, phase depth is {depth}")
    out = np.empty((samples, n))
    x = np.zeros(samples)
    for k in range(depth - 1, -1, -1):
        x = (bits[:, k] + x) * 0.5
        if k < n:
            out[:, k] = x
    return out


@dataclass(frozen=True)
class DyadicGrid:
    """The 2^K midpoints (2j+1)/2^(K+1), j = 0..2^K-1.

    Midpoints have odd numerators at level K+1, so no grid point lies on a
    dyadic discontinuity j/2^n for any n <= K, and the first K doublings of a
    grid point stay clear of 0.
    """

    level: int

    def __post_init__(self):
        if not 1 <= self.level <= 30:
            raise ValueError("grid level must be in [1, 30]")

    @property
    def size(self) -> int:
        return 1 << self.level

    @property
    def spacing(self) -> float:
        return 2.0 ** -self.level

    def points(self) -> np.ndarray:
        denom = 1 << (self.level + 1)
        return (2 * np.arange(self.size, dtype=np.int64) + 1) / denom

    def iterated_points(self, n: int) -> np.ndarray:
        """Exact values of T^n applied to every grid point.

        Computed in integer arithmetic: (2j+1)*2^n mod 2^(K+1), then divided.
        For n <= K the numerators stay odd multiples of 2^n, hence nonzero.
        """
        if n < 0:
            raise ValueError("n must be >= 0")
        if n > self.level:
            raise DepthExhaustedError(
                f"grid level {self.level} supports at most {self.level} doublings"
            )
        denom_bits = self.level + 1
        nums = (2 * np.arange(self.size, dtype=np.int64) + 1) << n
        nums &= (1 << denom_bits) - 1
        return nums / float(1 << denom_bits)

    def point_phase(self, j: int, extra_depth: int = 0) -> DyadicPhase:
        """Grid point j as an exact phase with optional guard bits."""
        if not 0 <= j < self.size:
            raise IndexError("grid index out of range")
        return DyadicPhase.from_fraction(
            Fraction(2 * j + 1, 1 << (self.level + 1)), self.level + 1 + extra_depth
        )
