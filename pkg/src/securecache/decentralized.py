"""Decentralized secure coded caching.

Users cache random bits of every file without coordination.  The server then
groups the bits of each file by the exact set of users holding them
(fragments), issues one uniform key per nonempty user subset sized to the
largest fragment it will pad, and multicasts

    K_S xor (xor over k in S of W[d_k, S - {k}])

for every nonempty subset ``S``, largest subsets first.  When per-user
encrypted unicast of the uncached bits is cheaper, that is sent instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DECENTRALIZED,
    InfeasibleError,
    BitBlock,
    DeliveryPayload,
    FileLibrary,
    IntegrityError,
    KeyStore,
    ParameterError,
    Subset,
    SystemParams,
    UserCache,
    all_subsets,
    check_demand,
    nonempty_subsets,
    subset_label,
    xor_all,
)

__all__ = [
    "FragmentMap",
    "DecentralizedPlacement",
    "place_decentralized",
    "map_fragments",
    "place_keys_decentralized",
    "provision_conventional_keys",
    "deliver_decentralized_coded",
    "deliver_conventional",
    "serve_decentralized",
    "decode_decentralized",
    "decode_conventional",
    "decentralized_rate",
    "coded_rate_expected",
    "conventional_rate",
    "expected_fragment_fraction",
]


def _q(N: int, M) -> float:
    return (M - 1) / (N - 1)


def coded_rate_expected(N: int, K: int, M) -> float:
    """Expected coded-delivery rate ``(1-q)/q * (1 - (1-q)^K)``, ``q = (M-1)/(N-1) > 0``."""
    q = _q(N, M)
    if q <= 0:
        raise InfeasibleError("coded decentralized delivery needs M > 1")
    return (1 - q) / q * (1 - (1 - q) ** K)


def coded_rate_sum(N: int, K: int, M) -> float:
    """Same quantity summed record-size by record-size: ``sum_s C(K,s) q^(s-1) (1-q)^(K-s+1)``."""
    from math import comb

    q = _q(N, M)
    return sum(comb(K, s) * q ** (s - 1) * (1 - q) ** (K - s + 1) for s in range(1, K + 1))


def conventional_rate(N: int, K: int, M) -> float:
    return K * (1 - _q(N, M))


def decentralized_rate(N: int, K: int, M) -> float:
    """Securely achievable decentralized rate (the cheaper of coded and conventional delivery)."""
    if M < 1 or M > N:
        raise ParameterError(f"M={M} outside [1, {N}]")
    if M == N:
        return 0.0
    if M == 1:
        return float(K)
    q = _q(N, M)
    return K * (1 - q) * min((N - 1) / (K * (M - 1)) * (1 - (1 - q) ** K), 1.0)


def expected_fragment_fraction(q: float, K: int, size: int) -> float:
    """Probability that a bit is cached by exactly one given set of ``size`` users."""
    return q**size * (1 - q) ** (K - size)


class FragmentMap:
    """Bit positions of each file, grouped by the exact set of users caching them."""

    def __init__(self, K: int, F: int, fragments: dict[int, dict[Subset, np.ndarray]]):
        self.K = K
        self.F = F
        self._fragments = fragments

    def __getitem__(self, key: tuple[int, Subset]) -> np.ndarray:
        n, T = key
        return self._fragments[n][tuple(T)]

    def size(self, n: int, T: Subset) -> int:
        return int(self._fragments[n][tuple(T)].size)

    def files(self):
        return sorted(self._fragments)

    def subsets(self, n: int):
        return list(self._fragments[n])

    def counts(self) -> dict[str, dict[str, int]]:
        return {
            str(n): {subset_label(T): int(idx.size) for T, idx in frags.items()}
            for n, frags in sorted(self._fragments.items())
        }

    def to_json(self) -> str:
        return json.dumps(self.counts(), indent=2)


@dataclass
class DecentralizedPlacement:
    params: SystemParams
    caches: list[UserCache]
    cached_per_file: int
    fragment_map: FragmentMap | None = None
    key_registry: KeyStore | None = None
    demand_bound: tuple[int, ...] | None = None
    conventional_keys: KeyStore | None = None
    key_mode: str | None = field(default=None)

    def cache(self, k: int) -> UserCache:
        return self.caches[k - 1]


def place_decentralized(
    library: FileLibrary, params: SystemParams, rng: np.random.Generator
) -> DecentralizedPlacement:
    """Each user independently caches ``round(q F)`` uniformly chosen bits of each file."""
    if params.scheme != DECENTRALIZED:
        raise ParameterError("place_decentralized needs decentralized params")
    if library.N != params.N or library.F != params.F:
        raise ParameterError("library does not match params")
    N, K, F = params.N, params.K, params.F
    count = round(params.q * F)
    caches = []
    for k in range(1, K + 1):
        cache = UserCache(user=k, budget_bits=params.M * F)
        for n in range(1, N + 1):
            idx = np.sort(rng.choice(F, size=count, replace=False))
            cache.index[n] = idx
            cache.data[n] = library[n].take(idx)
        caches.append(cache)
    return DecentralizedPlacement(params, caches, count)


def map_fragments(placement: DecentralizedPlacement) -> FragmentMap:
    """Partition every file by cache membership; ``2**K`` fragments per file, empty set included."""
    params = placement.params
    N, K, F = params.N, params.K, params.F
    fragments: dict[int, dict[Subset, np.ndarray]] = {}
    for n in range(1, N + 1):
        code = np.zeros(F, dtype=np.int64)
        for cache in placement.caches:
            code[cache.index[n]] |= 1 << (cache.user - 1)
        fragments[n] = {
            T: np.flatnonzero(code == sum(1 << (k - 1) for k in T)) for T in all_subsets(K)
        }
    fmap = FragmentMap(K, F, fragments)
    placement.fragment_map = fmap
    return fmap


def _required_key_lengths(fmap: FragmentMap, d: tuple[int, ...]) -> dict[Subset, int]:
    return {
        S: max(fmap.size(d[k - 1], tuple(j for j in S if j != k)) for k in S)
        for S in nonempty_subsets(fmap.K)
    }


def _install_keys(placement: DecentralizedPlacement, keys: KeyStore) -> None:
    for cache in placement.caches:
        cache.keys = {S: b for S, b in keys.items() if cache.user in S}


def place_keys_decentralized(
    placement: DecentralizedPlacement, demand, rng: np.random.Generator
) -> KeyStore:
    """Draw ``K_S`` for every nonempty ``S`` with length ``max_k |W[d_k, S - {k}]|`` and store it at ``S``."""
    params = placement.params
    d = check_demand(demand, params.N, params.K)
    fmap = placement.fragment_map or map_fragments(placement)
    keys = KeyStore()
    for S, length in _required_key_lengths(fmap, d).items():
        keys.generate(S, length, rng)
    placement.key_registry = keys
    placement.demand_bound = d
    placement.key_mode = "coded"
    _install_keys(placement, keys)
    return keys


def provision_conventional_keys(
    placement: DecentralizedPlacement, rng: np.random.Generator
) -> KeyStore:
    """One unique key per user, as long as the part of a file that user has not cached."""
    params = placement.params
    keys = KeyStore()
    for k in range(1, params.K + 1):
        keys.generate((k,), params.F - placement.cached_per_file, rng)
    placement.conventional_keys = keys
    placement.key_mode = "conventional"
    _install_keys(placement, keys)
    return keys


def _bits_at(library: FileLibrary, n: int, idx: np.ndarray) -> BitBlock:
    return library[n].take(idx)


def deliver_decentralized_coded(
    placement: DecentralizedPlacement, library: FileLibrary, demand
) -> DeliveryPayload:
    params = placement.params
    d = check_demand(demand, params.N, params.K)
    keys = placement.key_registry
    fmap = placement.fragment_map
    if keys is None or fmap is None:
        raise IntegrityError("keys have not been placed")
    if placement.demand_bound != d:
        raise IntegrityError(
            f"keys were sized for demand {placement.demand_bound}, not {d}"
        )
    required = _required_key_lengths(fmap, d)
    payload = DeliveryPayload(mode="coded")
    for S in nonempty_subsets(params.K, descending=True):
        if S not in keys or keys[S].length != required[S]:
            raise IntegrityError(f"key for {subset_label(S)} does not cover its record")
        if required[S] == 0:
            continue
        parts = [
            _bits_at(library, d[k - 1], fmap[d[k - 1], tuple(j for j in S if j != k)])
            for k in S
        ]
        payload.append(S, xor_all([keys[S], *parts]))
    return payload


def deliver_conventional(
    placement: DecentralizedPlacement, library: FileLibrary, demand
) -> DeliveryPayload:
    params = placement.params
    d = check_demand(demand, params.N, params.K)
    keys = placement.conventional_keys
    if keys is None:
        raise IntegrityError("conventional keys have not been provisioned")
    payload = DeliveryPayload(mode="conventional")
    F = params.F
    for cache in placement.caches:
        k = cache.user
        missing = np.setdiff1d(np.arange(F), cache.index[d[k - 1]], assume_unique=True)
        if missing.size == 0:
            continue
        payload.append((k,), xor_all([keys[(k,)], _bits_at(library, d[k - 1], missing)]))
    return payload


def serve_decentralized(
    placement: DecentralizedPlacement, library: FileLibrary, demand, rng: np.random.Generator
) -> DeliveryPayload:
    """Provision keys for, and send, whichever of coded or conventional delivery is shorter."""
    params = placement.params
    d = check_demand(demand, params.N, params.K)
    fmap = placement.fragment_map or map_fragments(placement)
    coded_bits = sum(_required_key_lengths(fmap, d).values())
    conventional_bits = params.K * (params.F - placement.cached_per_file)
    if coded_bits <= conventional_bits:
        place_keys_decentralized(placement, d, rng)
        return deliver_decentralized_coded(placement, library, d)
    provision_conventional_keys(placement, rng)
    return deliver_conventional(placement, library, d)


def _own_bits(cache: UserCache, n: int, idx: np.ndarray) -> BitBlock:
    """Read bits ``idx`` of file ``n`` out of this user's stored copy."""
    stored = cache.index[n]
    pos = np.searchsorted(stored, idx)
    if idx.size and (pos.max() >= stored.size or np.any(stored[pos] != idx)):
        raise IntegrityError(f"user {cache.user} has not cached the requested bits of file {n}")
    return cache.data[n].take(pos)


def decode_decentralized(
    cache: UserCache, payload: DeliveryPayload, demand, k: int, fragments: FragmentMap
) -> BitBlock:
    """Rebuild ``W[d_k]`` from cached bits plus every record whose subset contains ``k``.

    ``fragments`` is the server's public fragment index (bit positions only,
    no file content).
    """
    K, F = fragments.K, fragments.F
    N = len(fragments.files())
    d = check_demand(demand, N, K)
    want = d[k - 1]
    out = np.zeros(F, dtype=np.uint8)
    out[cache.index[want]] = cache.data[want].to_bits()
    filled = cache.index[want].size
    for S in nonempty_subsets(K):
        if k not in S:
            continue
        target = fragments[want, tuple(j for j in S if j != k)]
        if target.size == 0:
            continue
        record = payload.get(S)
        if record is None:
            raise IntegrityError(f"payload has no record for {subset_label(S)}")
        if S not in cache.keys:
            raise IntegrityError(f"user {k} is missing key {subset_label(S)}")
        side = [
            _own_bits(cache, d[j - 1], fragments[d[j - 1], tuple(i for i in S if i != j)])
            for j in S
            if j != k
        ]
        piece = xor_all([record, cache.keys[S], *side]).truncate(target.size)
        out[target] = piece.to_bits()
        filled += target.size
    if filled != F:
        raise IntegrityError(f"user {k} recovered {filled} of {F} bits")
    return BitBlock.from_bits(out)


def decode_conventional(cache: UserCache, payload: DeliveryPayload, demand, k: int) -> BitBlock:
    n = demand[k - 1]
    stored = cache.index[n]
    record = payload.get((k,))
    out_len = stored.size + (record.length if record is not None else 0)
    out = np.zeros(out_len, dtype=np.uint8)
    out[stored] = cache.data[n].to_bits()
    if record is not None:
        if (k,) not in cache.keys:
            raise IntegrityError(f"user {k} is missing its unicast key")
        missing = np.setdiff1d(np.arange(out_len), stored, assume_unique=True)
        out[missing] = (record ^ cache.keys[(k,)]).truncate(missing.size).to_bits()
    return BitBlock.from_bits(out)
