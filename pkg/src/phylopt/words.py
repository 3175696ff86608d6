"""Gene-inclusion words and the fitness arithmetic shared by every stage.

A word is a fixed-length binary vector over the lexicographically ordered
core genome: bit i is 1 iff gene i participates in tree inference.  Words
are immutable and hashable so they can serve as cache and journal keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True, slots=True)
class GeneWord:
    """Immutable binary inclusion vector of length ``n``.

    Bit i maps to the i-th core gene.  The textual form is the '0'/'1'
    string whose first character is gene 0.  An all-zero word is invalid:
    an empty gene set is never evaluated.
    """

    n: int
    mask: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"word length must be >= 1, got {self.n}")
        if not 0 < self.mask < (1 << self.n):
            raise ValueError("word must have at least one 1 bit and fit its length")

    @classmethod
    def all_ones(cls, n: int) -> "GeneWord":
        return cls(n, (1 << n) - 1)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "GeneWord":
        mask = 0
        n = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bits must be 0 or 1, got {b!r}")
            mask |= b << n
            n += 1
        return cls(n, mask)

    @classmethod
    def from_string(cls, text: str) -> "GeneWord":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a binary word: {text!r}")
        return cls.from_bits(int(c) for c in text)

    @classmethod
    def excluding(cls, n: int, excluded: Iterable[int]) -> "GeneWord":
        """All-ones word of length ``n`` with 0 exactly at ``excluded`` indices."""
        mask = (1 << n) - 1
        for i in set(excluded):
            if not 0 <= i < n:
                raise ValueError(f"excluded index {i} out of range for n={n}")
            mask &= ~(1 << i)
        if mask == 0:
            raise ValueError("cannot exclude every gene")
        return cls(n, mask)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise ValueError(f"index {i} out of range for n={self.n}")
        return (self.mask >> i) & 1

    def bits(self) -> tuple[int, ...]:
        return tuple((self.mask >> i) & 1 for i in range(self.n))

    def flip(self, positions: Iterable[int]) -> "GeneWord":
        """Word with exactly the given (distinct) bit positions inverted."""
        flip_mask = 0
        for i in positions:
            if not 0 <= i < self.n:
                raise ValueError(f"index {i} out of range for n={self.n}")
            if flip_mask >> i & 1:
                raise ValueError(f"duplicate flip position {i}")
            flip_mask |= 1 << i
        return GeneWord(self.n, self.mask ^ flip_mask)

    def zeroing(self, positions: Iterable[int]) -> "GeneWord":
        """Word with the given bit positions forced to 0."""
        mask = self.mask
        for i in positions:
            if not 0 <= i < self.n:
                raise ValueError(f"index {i} out of range for n={self.n}")
            mask &= ~(1 << i)
        return GeneWord(self.n, mask)

    @property
    def popcount(self) -> int:
        return self.mask.bit_count()

    def gene_rate(self) -> float:
        """Percentage of 1 bits, in (0, 100]."""
        return 100.0 * self.popcount / self.n

    def ones(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if (self.mask >> i) & 1)

    def zeros(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if not (self.mask >> i) & 1)

    def __str__(self) -> str:
        return "".join("1" if (self.mask >> i) & 1 else "0" for i in range(self.n))


@dataclass(frozen=True, slots=True)
class Score:
    """Fitness of one evaluated word: lowest bootstrap ``b``, gene rate ``p``
    and the combined score ``s`` (``b + p`` at the default unit weights)."""

    b: int
    p: float
    s: float


def fitness(b: int, p: float, weights: tuple[float, float] = (1.0, 1.0)) -> Score:
    """Combine lowest bootstrap and gene rate into a score.

    Both terms carry equal weight by default; ``weights`` is the hook for
    experimenting with other weightings.
    """
    if b != int(b) or isinstance(b, bool):
        raise ValueError(f"bootstrap must be an integer, got {b!r}")
    b = int(b)
    if not 0 <= b <= 100:
        raise ValueError(f"bootstrap out of range [0, 100]: {b}")
    if not 0 < p <= 100:
        raise ValueError(f"gene rate out of range (0, 100]: {p}")
    wb, wp = weights
    return Score(b=b, p=float(p), s=wb * b + wp * p)


def gene_rate(word: GeneWord) -> float:
    return word.gene_rate()


def word_excluding(n: int, excluded: Iterable[int]) -> GeneWord:
    return GeneWord.excluding(n, excluded)
