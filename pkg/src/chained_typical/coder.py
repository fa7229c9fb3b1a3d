"""Sequential enumerative coding over a chained family.

A word of length ``n`` in ``C[n]`` is sent as a ``0`` flag followed by its
lexicographic rank in ``ceil(log2 #C[n])`` bits. Any other word is sent as a
``1`` flag followed by its base-``|A|`` value in ``ceil(n log2 |A|)`` bits.
Bit sequences are tuples of 0/1 ints, most significant bit first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .chained_sets import ChainedFamily, slice_mass
from .exceptions import CorruptionError, DomainError
from .process import ProcessModel, entropy_rate, sample_words
from .validation import check_word

Bits = tuple[int, ...]
HEADER_BYTES = 8


def _to_bits(value: int, width: int) -> Bits:
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def _from_bits(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


@dataclass(frozen=True, eq=False)
class Codebook:
    """Enumerative code for the slices of ``family``.

    Ranks come from one walk down the family's prefix tree, which yields the
    rank of every prefix of the word along the way.
    """

    family: ChainedFamily

    @property
    def alphabet_size(self) -> int:
        return self.family.alphabet.size

    @property
    def depth(self) -> int:
        return self.family.n_max

    def rank_bits(self, n: int) -> int:
        """``ceil(log2 #C[n])``, computed on integers."""
        return (self.family.slice(n).shape[0] - 1).bit_length()

    def raw_bits(self, n: int) -> int:
        """``ceil(n log2 |A|)``, computed on integers."""
        return (self.alphabet_size**n - 1).bit_length()

    @cached_property
    def _sizes(self) -> tuple[int, ...]:
        return tuple(self.family.slice(n).shape[0] for n in range(1, self.depth + 1))

    def prefix_ranks(self, word: Sequence[int]) -> list[int | None]:
        return self.family.trie.prefix_ranks(word)

    def encode(self, word: Sequence[int]) -> Bits:
        w = check_word(word, self.alphabet_size)
        n = len(w)
        if not 1 <= n <= self.depth:
            raise DomainError(f"word length {n} outside 1..{self.depth}")
        rank = self.prefix_ranks(w)[-1]
        if rank is not None:
            return (0,) + _to_bits(rank, self.rank_bits(n))
        value = 0
        for a in w:
            value = value * self.alphabet_size + a
        return (1,) + _to_bits(value, self.raw_bits(n))

    def decode(self, bits: Sequence[int], n: int) -> tuple[int, ...]:
        """Inverse of :meth:`encode` at depth ``n``.

        Raises:
            CorruptionError: wrong length, non-binary entries, or an index
                outside the slice or the word space.
        """
        if not 1 <= n <= self.depth:
            raise DomainError(f"word length {n} outside 1..{self.depth}")
        bits = tuple(bits)
        if any(b not in (0, 1) for b in bits):
            raise CorruptionError("bit sequence contains entries other than 0 and 1")
        if not bits:
            raise CorruptionError("empty bit sequence")
        width = self.rank_bits(n) if bits[0] == 0 else self.raw_bits(n)
        if len(bits) != 1 + width:
            raise CorruptionError(f"expected {1 + width} bits for depth {n}, got {len(bits)}")
        value = _from_bits(bits[1:])
        if bits[0] == 0:
            if value >= self._sizes[n - 1]:
                raise CorruptionError(f"rank {value} outside slice of size {self._sizes[n - 1]}")
            return self.family.trie.unrank(value, n)
        if value >= self.alphabet_size**n:
            raise CorruptionError(f"raw value {value} outside the word space")
        out = []
        for _ in range(n):
            value, a = divmod(value, self.alphabet_size)
            out.append(a)
        return tuple(reversed(out))

    def code_length(self, word: Sequence[int]) -> int:
        return len(self.encode(word))


def encode(book: Codebook, word: Sequence[int]) -> Bits:
    return book.encode(word)


def decode(book: Codebook, bits: Sequence[int], n: int) -> tuple[int, ...]:
    return book.decode(bits, n)


def pack_bits(bits: Sequence[int]) -> bytes:
    """Big-endian 8-byte bit count followed by the bits, MSB first, zero padded."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size and arr.max() > 1:
        raise DomainError("bits must be 0 or 1")
    return len(arr).to_bytes(HEADER_BYTES, "big") + np.packbits(arr).tobytes()


def unpack_bits(data: bytes) -> Bits:
    if len(data) < HEADER_BYTES:
        raise CorruptionError("missing length header")
    n = int.from_bytes(data[:HEADER_BYTES], "big")
    body = data[HEADER_BYTES:]
    if len(body) != (n + 7) // 8:
        raise CorruptionError(f"header announces {n} bits but body has {len(body)} bytes")
    arr = np.unpackbits(np.frombuffer(body, dtype=np.uint8))
    if arr[n:].any():
        raise CorruptionError("nonzero padding bits")
    return tuple(int(b) for b in arr[:n])


def lz78_parse(word: Sequence[int]) -> list[tuple[int, int | None]]:
    """LZ78 phrases as ``(dictionary index, new symbol)``; the last may have no symbol."""
    table: dict[tuple[int, int], int] = {}
    out: list[tuple[int, int | None]] = []
    node = 0
    for a in word:
        a = int(a)
        nxt = table.get((node, a))
        if nxt is None:
            table[(node, a)] = len(table) + 1
            out.append((node, a))
            node = 0
        else:
            node = nxt
    if node:
        out.append((node, None))
    return out


def lz78_unparse(phrases: Sequence[tuple[int, int | None]]) -> tuple[int, ...]:
    entries: list[tuple[int, ...]] = [()]
    out: list[int] = []
    for idx, a in phrases:
        phrase = entries[idx] + (() if a is None else (a,))
        entries.append(phrase)
        out.extend(phrase)
    return tuple(out)


def lz78_bits(word: Sequence[int], alphabet_size: int) -> int:
    """Bits used by LZ78: phrase ``i`` spends ``ceil(log2 i)`` bits on its index plus one symbol."""
    sym = (alphabet_size - 1).bit_length()
    total = 0
    for i, (_, a) in enumerate(lz78_parse(word), start=1):
        total += (i - 1).bit_length() + (0 if a is None else sym)
    return total


@dataclass(frozen=True)
class RateReport:
    n: int
    trials: int
    seed: int
    mean_bits_per_symbol: float
    escape_frequency: float
    escape_stderr: float
    exact_escape_prob: float
    typical_code_length: int
    rate_bound: float  # (h + eps) / ln 2 + 2 / n
    entropy_bits: float  # h / ln 2
    lz78_bits_per_symbol: float

    @property
    def rate_ok(self) -> bool:
        return self.mean_bits_per_symbol <= self.rate_bound

    def escape_ok(self, sigmas: float = 3.0) -> bool:
        se = math.sqrt(self.exact_escape_prob * (1 - self.exact_escape_prob) / self.trials)
        return abs(self.escape_frequency - self.exact_escape_prob) <= sigmas * se


def rate_report(book: Codebook, model: ProcessModel, n: int, trials: int, seed: int) -> RateReport:
    """Monte-Carlo code length of ``trials`` seeded samples of length ``n``.

    Every sample is encoded and decoded; a mismatch raises ``AssertionError``.
    """
    if not 1 <= n <= book.depth:
        raise DomainError(f"n={n} outside 1..{book.depth}")
    if trials < 1:
        raise DomainError("trials must be positive")
    W = sample_words(model, n, trials, seed)
    total = escapes = lz = 0
    for row in W:
        w = tuple(int(a) for a in row)
        bits = book.encode(w)
        if book.decode(bits, n) != w:
            raise AssertionError(f"round trip failed for {w}")
        total += len(bits)
        escapes += bits[0]
        lz += lz78_bits(w, book.alphabet_size)
    freq = escapes / trials
    h = entropy_rate(model).h
    return RateReport(
        n=n,
        trials=trials,
        seed=seed,
        mean_bits_per_symbol=total / (trials * n),
        escape_frequency=freq,
        escape_stderr=math.sqrt(freq * (1 - freq) / trials),
        exact_escape_prob=1.0 - slice_mass(book.family, model, n),
        typical_code_length=1 + book.rank_bits(n),
        rate_bound=(h + book.family.epsilon) / math.log(2) + 2 / n,
        entropy_bits=h / math.log(2),
        lz78_bits_per_symbol=lz / (trials * n),
    )
