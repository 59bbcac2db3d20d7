"""Bit blocks, subset indexing, seeded randomness and shared domain types.

Everything the two caching schemes exchange is a :class:`BitBlock`: files,
subfiles, one-time-pad keys and ciphertexts.  A block is an arbitrary
precision integer plus an explicit bit length, with bit ``i`` stored at
weight ``2**i``.  XOR of blocks of unequal length zero-pads the shorter one
on the right (high indices), which is exactly what integer XOR does.
"""

from __future__ import annotations

import io
import itertools
import struct
from dataclasses import dataclass, field
from math import comb
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

Subset = tuple[int, ...]

CENTRALIZED = "centralized"
DECENTRALIZED = "decentralized"
SCHEMES = (CENTRALIZED, DECENTRALIZED)

# Largest binomial coefficient accepted by parameter validation.
MAX_BINOMIAL = 2**127 - 1

_DUMP_MAGIC = b"SCPD"


class ParameterError(ValueError):
    """A parameter lies outside the domain of an operation."""


class InfeasibleError(ParameterError):
    """The requested operating point cannot be achieved securely."""


class ConfigurationError(ValueError):
    """An experiment configuration cannot be realized (e.g. indivisible F)."""


class IntegrityError(RuntimeError):
    """Cache contents or keys do not match what a payload requires."""


# --------------------------------------------------------------------------
# Bit blocks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BitBlock:
    """Immutable bit sequence of ``length`` bits; bit ``i`` is ``(value >> i) & 1``."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ParameterError(f"negative block length {self.length}")
        if self.value < 0 or self.value >> self.length:
            raise ParameterError("block value does not fit in its length")

    @classmethod
    def zeros(cls, length: int) -> BitBlock:
        return cls(0, length)

    @classmethod
    def from_string(cls, text: str) -> BitBlock:
        """Build from a string of '0'/'1' characters, character ``i`` being bit ``i``."""
        value = 0
        for i, ch in enumerate(text):
            if ch not in "01":
                raise ParameterError(f"invalid bit character {ch!r}")
            if ch == "1":
                value |= 1 << i
        return cls(value, len(text))

    @classmethod
    def from_bits(cls, bits) -> BitBlock:
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.size == 0:
            return cls(0, 0)
        packed = np.packbits(arr, bitorder="little")
        return cls(int.from_bytes(packed.tobytes(), "little"), int(arr.size))

    def to_bits(self) -> np.ndarray:
        if self.length == 0:
            return np.zeros(0, dtype=np.uint8)
        raw = self.value.to_bytes((self.length + 7) // 8, "little")
        return np.unpackbits(
            np.frombuffer(raw, dtype=np.uint8), bitorder="little", count=self.length
        )

    def __str__(self) -> str:
        return "".join(str((self.value >> i) & 1) for i in range(self.length))

    def __len__(self) -> int:
        return self.length

    def __xor__(self, other: BitBlock) -> BitBlock:
        return xor_pad(self, other)

    def popcount(self) -> int:
        return bin(self.value).count("1")

    def truncate(self, length: int) -> BitBlock:
        """First ``length`` bits; ``length`` may not exceed the block length."""
        if length > self.length:
            raise ParameterError(f"cannot truncate {self.length} bits to {length}")
        return BitBlock(self.value & ((1 << length) - 1), length)

    def slice(self, start: int, stop: int) -> BitBlock:
        if not 0 <= start <= stop <= self.length:
            raise ParameterError(f"slice [{start}:{stop}] outside block of {self.length}")
        return BitBlock((self.value >> start) & ((1 << (stop - start)) - 1), stop - start)

    def take(self, indices) -> BitBlock:
        """Gather the bits at ``indices`` (in the given order) into a new block."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            return BitBlock(0, 0)
        return BitBlock.from_bits(self.to_bits()[idx])

    @staticmethod
    def concat(blocks: Iterable[BitBlock]) -> BitBlock:
        value = 0
        offset = 0
        for b in blocks:
            value |= b.value << offset
            offset += b.length
        return BitBlock(value, offset)

    # serialization: 8-byte LE bit length, then packed bytes (LSB-first)
    def to_bytes(self) -> bytes:
        nbytes = (self.length + 7) // 8
        return struct.pack("<Q", self.length) + self.value.to_bytes(nbytes, "little")

    @classmethod
    def read_from(cls, stream: BinaryIO) -> BitBlock:
        head = stream.read(8)
        if len(head) != 8:
            raise ParameterError("truncated block header")
        (length,) = struct.unpack("<Q", head)
        nbytes = (length + 7) // 8
        raw = stream.read(nbytes)
        if len(raw) != nbytes:
            raise ParameterError("truncated block body")
        value = int.from_bytes(raw, "little")
        if value >> length:
            raise ParameterError("padding bits of final byte are not zero")
        return cls(value, length)

    @classmethod
    def from_bytes(cls, data: bytes) -> BitBlock:
        stream = io.BytesIO(data)
        block = cls.read_from(stream)
        if stream.read():
            raise ParameterError("trailing bytes after block")
        return block


def xor_pad(a: BitBlock, b: BitBlock) -> BitBlock:
    """XOR two blocks, zero-padding the shorter one on the right."""
    return BitBlock(a.value ^ b.value, max(a.length, b.length))


def xor_all(blocks: Iterable[BitBlock]) -> BitBlock:
    out = BitBlock(0, 0)
    for b in blocks:
        out = xor_pad(out, b)
    return out


def make_rng(seed: int | None) -> np.random.Generator:
    """One generator per experiment; draws happen as files, then placement, then keys."""
    return np.random.default_rng(seed)


def gen_uniform_block(length: int, rng: np.random.Generator) -> BitBlock:
    """Draw ``length`` i.i.d. fair bits from ``rng``."""
    if length < 0:
        raise ParameterError(f"negative block length {length}")
    if length == 0:
        return BitBlock(0, 0)
    raw = rng.integers(0, 256, size=(length + 7) // 8, dtype=np.uint8)
    value = int.from_bytes(raw.tobytes(), "little") & ((1 << length) - 1)
    return BitBlock(value, length)


# --------------------------------------------------------------------------
# Subsets of users
# --------------------------------------------------------------------------


def enumerate_subsets(K: int, s: int) -> list[Subset]:
    """All ``s``-subsets of ``{1..K}`` as sorted tuples, in lexicographic order."""
    if K < 0 or s < 0 or s > K:
        raise ParameterError(f"subset size {s} invalid for {K} users")
    return list(itertools.combinations(range(1, K + 1), s))


def nonempty_subsets(K: int, descending: bool = False) -> Iterator[Subset]:
    """Nonempty subsets grouped by size (ascending or descending), lexicographic within a size."""
    sizes = range(K, 0, -1) if descending else range(1, K + 1)
    for s in sizes:
        yield from itertools.combinations(range(1, K + 1), s)


def all_subsets(K: int) -> Iterator[Subset]:
    for s in range(K + 1):
        yield from itertools.combinations(range(1, K + 1), s)


def subset_rank(members: Sequence[int], K: int) -> int:
    """Position of ``members`` in :func:`enumerate_subsets` ``(K, len(members))``."""
    s = len(members)
    rank = 0
    prev = 0
    for i, c in enumerate(members):
        if not prev < c <= K:
            raise ParameterError(f"{tuple(members)} is not a sorted subset of 1..{K}")
        for v in range(prev + 1, c):
            rank += comb(K - v, s - i - 1)
        prev = c
    return rank


def subset_unrank(rank: int, K: int, s: int) -> Subset:
    total = comb(K, s)
    if not 0 <= rank < total:
        raise ParameterError(f"rank {rank} outside [0, {total})")
    out = []
    v = 1
    for i in range(s):
        while True:
            block = comb(K - v, s - i - 1)
            if rank < block:
                break
            rank -= block
            v += 1
        out.append(v)
        v += 1
    return tuple(out)


def subset_label(members: Sequence[int]) -> str:
    return "{" + ",".join(str(m) for m in members) + "}"


def parse_subset_label(label: str) -> Subset:
    body = label.strip().removeprefix("{").removesuffix("}")
    return tuple(int(x) for x in body.split(",") if x.strip())


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemParams:
    """One experiment: ``N`` files of ``F`` bits, ``K`` users, placement parameter ``t``.

    For the centralized scheme ``t`` is an integer in ``0..K`` and
    ``M = (N-1) t / K + 1``.  For the decentralized scheme ``t`` is the data
    memory ``M_D`` in ``(0, N]`` and ``M = (N-1) t / N + 1``.
    """

    scheme: str
    N: int
    K: int
    F: int
    t: float
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.N < 1 or self.K < 1 or self.F < 1:
            raise ParameterError(f"need N, K, F >= 1, got {self.N}, {self.K}, {self.F}")
        if self.scheme == CENTRALIZED:
            if int(self.t) != self.t or not 0 <= self.t <= self.K:
                raise ParameterError(f"centralized t must be an integer in 0..{self.K}")
            object.__setattr__(self, "t", int(self.t))
            n_sub = comb(self.K, self.t)
            if n_sub > MAX_BINOMIAL or comb(self.K, min(self.t + 1, self.K)) > MAX_BINOMIAL:
                raise ParameterError(f"C({self.K}, {self.t}) exceeds the supported range")
            if self.F % n_sub:
                raise ConfigurationError(
                    f"F={self.F} must be divisible by C({self.K},{self.t})={n_sub}"
                )
        else:
            if not 0 < self.t <= self.N:
                raise InfeasibleError(
                    f"decentralized placement needs t in (0, N], got t={self.t} (M <= 1)"
                )
            if self.N < 2:
                raise ParameterError("decentralized placement needs N >= 2")

    @property
    def M(self) -> float:
        if self.scheme == CENTRALIZED:
            return (self.N - 1) * self.t / self.K + 1
        return (self.N - 1) * self.t / self.N + 1

    @property
    def q(self) -> float:
        """Fraction of each file a user caches: ``(M-1)/(N-1)``."""
        if self.scheme == CENTRALIZED:
            return self.t / self.K
        return self.t / self.N

    @classmethod
    def from_memory(cls, scheme, N, K, F, M, seed=0, tol=1e-3) -> SystemParams:
        """Build params from a cache size ``M``; centralized ``M`` is snapped to the grid within ``tol``."""
        if M < 1:
            raise InfeasibleError("M < 1 infeasible under secure delivery")
        if M > N:
            raise ParameterError(f"M={M} exceeds N={N}")
        if scheme == CENTRALIZED:
            if N == 1:
                return cls(scheme, N, K, F, K, seed)
            t_real = K * (M - 1) / (N - 1)
            t = round(t_real)
            if abs(t - t_real) > tol * K:
                raise ParameterError(f"M={M} is not a centralized grid point for N={N}, K={K}")
            return cls(scheme, N, K, F, t, seed)
        return cls(scheme, N, K, F, N * (M - 1) / (N - 1), seed)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "N": self.N,
            "K": self.K,
            "F": self.F,
            "t": self.t,
            "M": self.M,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FileLibrary:
    files: tuple[BitBlock, ...]

    def __post_init__(self):
        if not self.files:
            raise ParameterError("library needs at least one file")
        F = self.files[0].length
        if any(f.length != F for f in self.files):
            raise ParameterError("all files must have the same length")

    @classmethod
    def random(cls, N: int, F: int, rng: np.random.Generator) -> FileLibrary:
        return cls(tuple(gen_uniform_block(F, rng) for _ in range(N)))

    @property
    def N(self) -> int:
        return len(self.files)

    @property
    def F(self) -> int:
        return self.files[0].length

    def __getitem__(self, n: int) -> BitBlock:
        """File ``n`` using 1-based indexing."""
        if not 1 <= n <= len(self.files):
            raise ParameterError(f"file index {n} outside 1..{len(self.files)}")
        return self.files[n - 1]


def check_demand(demand: Sequence[int], N: int, K: int) -> tuple[int, ...]:
    """Validate a demand vector (1-based file indices, one per user)."""
    d = tuple(int(x) for x in demand)
    if len(d) != K:
        raise ParameterError(f"demand has {len(d)} entries, expected K={K}")
    bad = [x for x in d if not 1 <= x <= N]
    if bad:
        raise ParameterError(f"demand entries {bad} outside 1..{N}")
    return d


def worst_case_demand(N: int, K: int) -> tuple[int, ...]:
    """All-distinct demands over the first ``min(N, K)`` files, cycled to length ``K``."""
    return tuple((k % min(N, K)) + 1 for k in range(K))


def all_demands(N: int, K: int) -> Iterator[tuple[int, ...]]:
    return itertools.product(range(1, N + 1), repeat=K)


@dataclass
class UserCache:
    """Contents ``Z_k`` of one user's cache: data blocks and keys, within ``budget_bits``."""

    user: int
    budget_bits: float
    data: dict = field(default_factory=dict)
    keys: dict = field(default_factory=dict)
    # decentralized only: file -> sorted bit positions held in ``data[file]``
    index: dict = field(default_factory=dict)

    @property
    def data_bits(self) -> int:
        return sum(b.length for b in self.data.values())

    @property
    def key_bits(self) -> int:
        return sum(b.length for b in self.keys.values())

    @property
    def stored_bits(self) -> int:
        return self.data_bits + self.key_bits


class KeyStore:
    """Server-side registry of one-time-pad keys indexed by user subset.

    Every key carries a provenance tag ``(kind, serial)``: ``kind`` is
    ``"uniform"`` for draws from the generator and ``"manual"`` for blocks
    inserted by hand.  Aliasing copies the tag, so a pad reused under two
    subsets is detectable.
    """

    def __init__(self):
        self._keys: dict[Subset, BitBlock] = {}
        self._tags: dict[Subset, tuple[str, int]] = {}
        self._serial = 0

    def _next(self, kind: str) -> tuple[str, int]:
        self._serial += 1
        return (kind, self._serial)

    def generate(self, subset: Subset, length: int, rng: np.random.Generator) -> BitBlock:
        block = gen_uniform_block(length, rng)
        self._keys[subset] = block
        self._tags[subset] = self._next("uniform")
        return block

    def put(self, subset: Subset, block: BitBlock, kind: str = "manual") -> None:
        self._keys[subset] = block
        self._tags[subset] = self._next(kind)

    def alias(self, subset: Subset, source: Subset) -> None:
        self._keys[subset] = self._keys[source]
        self._tags[subset] = self._tags[source]

    def tag(self, subset: Subset) -> tuple[str, int]:
        return self._tags[subset]

    def copy(self) -> KeyStore:
        other = KeyStore()
        other._keys = dict(self._keys)
        other._tags = dict(self._tags)
        other._serial = self._serial
        return other

    def __getitem__(self, subset: Subset) -> BitBlock:
        return self._keys[subset]

    def __contains__(self, subset) -> bool:
        return subset in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def __iter__(self):
        return iter(self._keys)

    def items(self):
        return self._keys.items()

    def lengths(self) -> dict[Subset, int]:
        return {s: b.length for s, b in self._keys.items()}

    @property
    def total_bits(self) -> int:
        return sum(b.length for b in self._keys.values())


@dataclass
class DeliveryPayload:
    """The multicast transmission: ordered ``(subset, ciphertext)`` records."""

    records: list[tuple[Subset, BitBlock]] = field(default_factory=list)
    mode: str = "coded"

    def append(self, subset: Subset, block: BitBlock) -> None:
        if any(s == subset for s, _ in self.records):
            raise IntegrityError(f"subset {subset_label(subset)} already has a record")
        self.records.append((tuple(subset), block))

    @property
    def total_bits(self) -> int:
        return sum(b.length for _, b in self.records)

    def rate(self, F: int) -> float:
        return self.total_bits / F

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def get(self, subset: Subset) -> BitBlock | None:
        for s, b in self.records:
            if s == subset:
                return b
        return None

    def canonical(self) -> tuple:
        """Hashable view of exactly what a wiretapper observes."""
        return tuple((s, b.value, b.length) for s, b in self.records)

    def dump(self, stream: BinaryIO) -> None:
        """Write the record stream: magic, record count, then per record the member list and block."""
        stream.write(_DUMP_MAGIC + struct.pack("<I", len(self.records)))
        for subset, block in self.records:
            stream.write(struct.pack("<H", len(subset)))
            stream.write(struct.pack(f"<{len(subset)}H", *subset))
            stream.write(block.to_bytes())

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, stream: BinaryIO) -> DeliveryPayload:
        head = stream.read(8)
        if len(head) != 8 or head[:4] != _DUMP_MAGIC:
            raise ParameterError("not a payload dump")
        (count,) = struct.unpack("<I", head[4:])
        payload = cls()
        for _ in range(count):
            (size,) = struct.unpack("<H", stream.read(2))
            members = struct.unpack(f"<{size}H", stream.read(2 * size)) if size else ()
            payload.append(tuple(members), BitBlock.read_from(stream))
        return payload

    @classmethod
    def from_bytes(cls, data: bytes) -> DeliveryPayload:
        return cls.load(io.BytesIO(data))
