"""Bit strings, packed k-tuples, grid views and Boolean characters.

Conventions used throughout the package:

* Wires (coordinates) are numbered ``1..n``.
* A string's integer value is ``sum(bit_a << (a - 1))``.
* A k-tuple is packed string-major: bit ``a`` of string ``i`` (both 1-based)
  sits at position ``(i - 1) * n + (a - 1)`` of the state index.
* The +-1 view used by characters maps bit 0 to +1 and bit 1 to -1.
* Grids are row-major: cell ``(i, j)`` of a ``side x side`` grid is
  coordinate ``(i - 1) * side + j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ParameterError, RangeError


@dataclass(frozen=True)
class BitString:
    """An n-bit string; ``bits[a - 1]`` is coordinate ``a``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if not self.bits:
            raise DimensionError("a BitString needs at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"bits must be 0 or 1, got {self.bits}")

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        """Parse ``"0110"``; characters are coordinates 1..n left to right."""
        return cls(tuple(int(c) for c in text.strip()))

    @classmethod
    def from_int(cls, value: int, n: int) -> "BitString":
        if not 0 <= value < (1 << n):
            raise RangeError(f"value {value} does not fit in {n} bits")
        return cls(tuple((value >> a) & 1 for a in range(n)))

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def value(self) -> int:
        return sum(b << a for a, b in enumerate(self.bits))

    def __getitem__(self, a: int) -> int:
        """Bit at 1-based coordinate ``a``."""
        if not 1 <= a <= self.n:
            raise RangeError(f"coordinate {a} outside [1, {self.n}]")
        return self.bits[a - 1]

    def __len__(self) -> int:
        return self.n

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def _as_bitstring(x) -> BitString:
    if isinstance(x, BitString):
        return x
    if isinstance(x, str):
        return BitString.from_str(x)
    return BitString(tuple(x))


def pack_tuple(strings: Sequence) -> int:
    """Pack k equal-length strings into the canonical state index.

    >>> pack_tuple(["01", "10"])
    6
    """
    strings = [_as_bitstring(s) for s in strings]
    if not strings:
        raise DimensionError("need k >= 1 strings")
    n = strings[0].n
    if any(s.n != n for s in strings):
        raise DimensionError("all strings in a tuple must have the same length")
    index = 0
    for i, s in enumerate(strings):
        index |= s.value << (i * n)
    return index


def unpack_tuple(index: int, n: int, k: int) -> tuple[BitString, ...]:
    """Inverse of :func:`pack_tuple`."""
    if n < 1 or k < 1:
        raise ParameterError("n and k must be positive")
    if not 0 <= index < (1 << (n * k)):
        raise RangeError(f"index {index} outside [0, 2^{n * k})")
    mask = (1 << n) - 1
    return tuple(BitString.from_int((index >> (i * n)) & mask, n) for i in range(k))


@dataclass(frozen=True)
class TupleState:
    """A k-tuple of n-bit strings together with its packed index."""

    n: int
    k: int
    index: int

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ParameterError("n and k must be positive")
        if not 0 <= self.index < (1 << (self.n * self.k)):
            raise RangeError(f"index {self.index} outside [0, 2^{self.n * self.k})")

    @classmethod
    def from_strings(cls, strings: Sequence) -> "TupleState":
        strings = [_as_bitstring(s) for s in strings]
        return cls(strings[0].n, len(strings), pack_tuple(strings))

    @property
    def strings(self) -> tuple[BitString, ...]:
        return unpack_tuple(self.index, self.n, self.k)

    @property
    def values(self) -> tuple[int, ...]:
        mask = (1 << self.n) - 1
        return tuple((self.index >> (i * self.n)) & mask for i in range(self.k))

    def bit(self, i: int, a: int) -> int:
        """Bit of string ``i`` at coordinate ``a`` (both 1-based)."""
        if not (1 <= i <= self.k and 1 <= a <= self.n):
            raise RangeError(f"(string {i}, coordinate {a}) out of range")
        return (self.index >> ((i - 1) * self.n + (a - 1))) & 1


def hamming_delta(x, y) -> frozenset[int]:
    """Coordinates where ``x`` and ``y`` differ; its size is the Hamming distance."""
    x, y = _as_bitstring(x), _as_bitstring(y)
    if x.n != y.n:
        raise DimensionError(f"length mismatch: {x.n} vs {y.n}")
    return frozenset(a + 1 for a in range(x.n) if x.bits[a] != y.bits[a])


def hamming_distance(x, y) -> int:
    return len(hamming_delta(x, y))


@dataclass(frozen=True)
class CharacterIndex:
    """Index ``(S_1, ..., S_k)`` of a product character; each ``S_i`` holds 1-based coordinates."""

    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(frozenset(int(a) for a in s) for s in self.sets))
        if not self.sets:
            raise DimensionError("a character index needs k >= 1 sets")

    @property
    def k(self) -> int:
        return len(self.sets)

    def is_constant(self) -> bool:
        return all(not s for s in self.sets)

    def union(self) -> frozenset[int]:
        return frozenset().union(*self.sets)

    def mask(self, n: int) -> int:
        """Bit mask over the packed state index selecting every ``(i, a)`` with ``a in S_i``."""
        m = 0
        for i, s in enumerate(self.sets):
            for a in s:
                if not 1 <= a <= n:
                    raise DimensionError(f"coordinate {a} outside [1, {n}]")
                m |= 1 << (i * n + a - 1)
        return m

    @classmethod
    def from_mask(cls, mask: int, n: int, k: int) -> "CharacterIndex":
        return cls(tuple(
            frozenset(a + 1 for a in range(n) if (mask >> (i * n + a)) & 1) for i in range(k)
        ))

    def __str__(self) -> str:
        parts = ["{" + ",".join(map(str, sorted(s))) + "}" for s in self.sets]
        return "(" + ",".join(parts) + ")"


def character_eval(chi: CharacterIndex, X: TupleState) -> int:
    """Value of the character at ``X`` in the +-1 encoding."""
    if chi.k != X.k:
        raise DimensionError(f"character has k={chi.k}, state has k={X.k}")
    parity = bin(chi.mask(X.n) & X.index).count("1") & 1
    return -1 if parity else 1


def character_vector(chi: CharacterIndex, n: int, k: int) -> np.ndarray:
    """All values of a character as an int8 vector indexed by state."""
    if chi.k != k:
        raise DimensionError(f"character has k={chi.k}, expected {k}")
    idx = np.arange(1 << (n * k), dtype=np.int64)
    parity = popcount(idx & chi.mask(n)) & 1
    return (1 - 2 * parity).astype(np.int8)


def popcount(a: np.ndarray) -> np.ndarray:
    """Vectorised population count of a non-negative int64 array."""
    a = np.asarray(a, dtype=np.int64).copy()
    count = np.zeros(a.shape, dtype=np.int64)
    while np.any(a):
        count += a & 1
        a >>= 1
    return count


def state_strings(n: int, k: int, states=None) -> np.ndarray:
    """Integer values of each string, shape ``(len(states), k)``."""
    if states is None:
        states = np.arange(1 << (n * k), dtype=np.int64)
    states = np.asarray(states, dtype=np.int64)
    mask = (1 << n) - 1
    return np.stack([(states >> (i * n)) & mask for i in range(k)], axis=-1)


def pack_strings(values: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`state_strings` along the last axis."""
    values = np.asarray(values, dtype=np.int64)
    out = np.zeros(values.shape[:-1], dtype=np.int64)
    for i in range(values.shape[-1]):
        out |= values[..., i] << (i * n)
    return out


def extract_bits(values: np.ndarray, coords: Sequence[int]) -> np.ndarray:
    """Gather coordinates ``coords`` (1-based) into a compact integer, first coordinate lowest."""
    values = np.asarray(values, dtype=np.int64)
    out = np.zeros_like(values)
    for pos, a in enumerate(coords):
        out |= ((values >> (a - 1)) & 1) << pos
    return out


def deposit_bits(values: np.ndarray, coords: Sequence[int], compact: np.ndarray) -> np.ndarray:
    """Overwrite coordinates ``coords`` of ``values`` with the bits of ``compact``."""
    values = np.asarray(values, dtype=np.int64)
    compact = np.asarray(compact, dtype=np.int64)
    clear = 0
    for a in coords:
        clear |= 1 << (a - 1)
    out = values & ~clear
    for pos, a in enumerate(coords):
        out |= ((compact >> pos) & 1) << (a - 1)
    return out


def coord_mask(coords: Iterable[int]) -> int:
    m = 0
    for a in coords:
        m |= 1 << (a - 1)
    return m


def walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along axis 0.

    Entry ``s`` of the result is ``sum_x (-1)^{popcount(s & x)} v[x]``. Integer
    and object inputs stay exact.
    """
    a = np.array(v, copy=True)
    size = a.shape[0]
    if size & (size - 1):
        raise DimensionError("length must be a power of two")
    rest = a.shape[1:]
    h = 1
    while h < size:
        a = a.reshape((size // (2 * h), 2, h) + rest)
        x = a[:, 0].copy()
        y = a[:, 1]
        a[:, 0] = x + y
        a[:, 1] = x - y
        a = a.reshape((size,) + rest)
        h *= 2
    return a


@dataclass(frozen=True)
class GridView:
    """Row-major ``side x side`` view of n = side^2 coordinates."""

    side: int

    def __post_init__(self):
        if self.side < 1:
            raise ParameterError("side must be positive")

    @classmethod
    def for_n(cls, n: int) -> "GridView":
        side = int(round(n ** 0.5))
        if side * side != n:
            raise ParameterError(f"n={n} is not a perfect square")
        return cls(side)

    @property
    def n(self) -> int:
        return self.side * self.side

    def coord(self, i: int, j: int) -> int:
        if not (1 <= i <= self.side and 1 <= j <= self.side):
            raise RangeError(f"cell ({i}, {j}) outside the {self.side}x{self.side} grid")
        return (i - 1) * self.side + j

    def row_coords(self, i: int) -> tuple[int, ...]:
        return tuple(self.coord(i, j) for j in range(1, self.side + 1))

    def col_coords(self, j: int) -> tuple[int, ...]:
        return tuple(self.coord(i, j) for i in range(1, self.side + 1))

    def rows(self) -> list[tuple[int, ...]]:
        return [self.row_coords(i) for i in range(1, self.side + 1)]

    def cols(self) -> list[tuple[int, ...]]:
        return [self.col_coords(j) for j in range(1, self.side + 1)]

    def row(self, X: TupleState, ell: int, i: int) -> BitString:
        """Row ``i`` of string ``ell`` as a BitString of length ``side``."""
        self._check(X)
        return BitString(tuple(X.bit(ell, a) for a in self.row_coords(i)))

    def col(self, X: TupleState, ell: int, j: int) -> BitString:
        self._check(X)
        return BitString(tuple(X.bit(ell, a) for a in self.col_coords(j)))

    def _check(self, X: TupleState):
        if X.n != self.n:
            raise DimensionError(f"state has n={X.n}, grid expects {self.n}")
