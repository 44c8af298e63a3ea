"""Keyword extraction and per-file Bloom filters over encrypted keywords.

Filter positions are salted with the file number so two files sharing a
keyword still show completely different bit patterns. Membership queries
have no false negatives; the false-positive rate follows
``c = (1 - (1 - 1/m)^(kn))^k`` and is minimized near ``k = (m/n) ln 2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .crypto import indexed_hash
from .keytree import NumberPath

# Small fixed English stop-word list for filename keyword extraction.
STOP_WORDS = frozenset(
    """a an and are as at be but by for from had has have he her his i if in
    into is it its me my no not of on or our she so than that the their them
    then there these they this to up was we were what when where which who
    will with you your""".split()
)

_TOKEN = re.compile(r"[a-z0-9]+")


def extract_keywords(filename: str) -> list[str]:
    """Keywords of a filename: lowercase alphanumeric tokens minus
    stop-words, deduplicated in order of first appearance."""
    if not filename:
        raise ValueError("filename must be non-empty")
    seen = []
    for token in _TOKEN.findall(filename.lower()):
        if token in STOP_WORDS or token in seen:
            continue
        seen.append(token)
    return seen


@dataclass
class BloomFilter:
    """m-bit array with k salted hash positions per inserted keyword."""

    bits: bytearray
    m: int
    k: int

    @classmethod
    def empty(cls, m: int, k: int) -> "BloomFilter":
        if m < 1:
            raise ValueError("m must be positive")
        if not 1 <= k <= 64:
            raise ValueError("k must be in 1..64")
        return cls(bytearray((m + 7) // 8), m, k)

    def get(self, position: int) -> bool:
        return bool(self.bits[position >> 3] >> (position & 7) & 1)

    def set(self, position: int) -> None:
        self.bits[position >> 3] |= 1 << (position & 7)

    def popcount(self) -> int:
        return sum(byte.bit_count() for byte in self.bits)

    def to_bytes(self) -> bytes:
        """Wire form: 8-octet big-endian m, 1-octet k, then the bit
        array (little-endian bit order within octets)."""
        return self.m.to_bytes(8, "big") + self.k.to_bytes(1, "big") + bytes(self.bits)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        if len(data) < 9:
            raise ValueError("truncated filter")
        m = int.from_bytes(data[:8], "big")
        k = data[8]
        body = data[9:]
        if len(body) != (m + 7) // 8:
            raise ValueError("filter bit array length mismatch")
        return cls(bytearray(body), m, k)


def _position(index: int, salted: bytes, m: int) -> int:
    # low-order 64 bits of the digest, big-endian, reduced mod m
    return int.from_bytes(indexed_hash(index, salted)[-8:], "big") % m


def bf_positions(
    file_number: NumberPath, encrypted_keyword: bytes, m: int, k: int
) -> list[int]:
    """The k bit positions of one encrypted keyword in one file's filter."""
    salted = file_number.encode() + encrypted_keyword
    return [_position(index, salted, m) for index in range(1, k + 1)]


def bf_build(
    file_number: NumberPath, encrypted_keywords, m: int, k: int
) -> BloomFilter:
    """Filter with every keyword's positions set and nothing else."""
    bf = BloomFilter.empty(m, k)
    for keyword in encrypted_keywords:
        for position in bf_positions(file_number, keyword, m, k):
            bf.set(position)
    return bf


def bf_query(bf: BloomFilter, file_number: NumberPath, encrypted_keyword: bytes) -> bool:
    """True iff every position for the keyword is set.

    Positions are hashed lazily and the scan stops at the first unset
    bit, so misses usually cost far fewer than k hashes.
    """
    salted = file_number.encode() + encrypted_keyword
    for index in range(1, bf.k + 1):
        if not bf.get(_position(index, salted, bf.m)):
            return False
    return True


def fp_rate(k: int, n: int, m: int) -> float:
    """Predicted false-positive probability, exact form."""
    if m < 1 or k < 1 or n < 0:
        raise ValueError("need m >= 1, k >= 1, n >= 0")
    if n == 0:
        return 0.0
    return (1.0 - (1.0 - 1.0 / m) ** (k * n)) ** k


def optimal_k(m: int, n: int) -> int:
    """Hash count minimizing the false-positive rate: round((m/n) ln 2),
    at least 1."""
    if n < 1 or m < n:
        raise ValueError("need m >= n >= 1")
    return max(1, round(m / n * math.log(2)))


@dataclass(frozen=True)
class FpParameters:
    m: int
    k: int
    n: int
    c: float


def choose_parameters(n: int, target_fp: float) -> FpParameters:
    """Smallest filter (m a multiple of 8, k optimal for it) whose
    predicted false-positive rate meets the target."""
    if not 0.0 < target_fp < 1.0:
        raise ValueError("target_fp must be in (0, 1)")
    if n < 1:
        raise ValueError("n must be positive")
    # start below the analytic bound m/n = ln(target) / ln(0.6185), then walk up
    approx = n * math.log(target_fp) / math.log(0.6185)
    m = max(8 * n, (int(approx) // 8) * 8 - 64, 8)
    while True:
        k = optimal_k(m, n)
        c = fp_rate(k, n, m)
        if c <= target_fp:
            return FpParameters(m=m, k=k, n=n, c=c)
        m += 8
