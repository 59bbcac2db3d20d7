"""Centralized secure coded caching.

Each file is split into ``C(K, t)`` equal subfiles, one per ``t``-subset of
users, and every user stores the subfiles whose index set contains it.  One
uniform key per ``(t+1)``-subset is stored at the members of that subset.
On demand, the server sends for every ``(t+1)``-subset ``S`` the XOR of the
subfiles ``W[d_k, S - {k}]`` (``k`` in ``S``) padded with the key of ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, floor

import numpy as np

from .core import (
    CENTRALIZED,
    BitBlock,
    DeliveryPayload,
    FileLibrary,
    InfeasibleError,
    IntegrityError,
    KeyStore,
    ParameterError,
    Subset,
    SystemParams,
    UserCache,
    check_demand,
    enumerate_subsets,
    subset_label,
    subset_rank,
    xor_all,
)

__all__ = [
    "CentralizedPlacement",
    "cache_size_from_t",
    "t_from_cache_size",
    "memory_split",
    "grid_rate",
    "centralized_rate",
    "place_centralized",
    "deliver_centralized",
    "decode_centralized",
]

# Tolerance used to snap a real t onto the integer grid.
_GRID_TOL = 1e-9


def _check_t(K: int, t: int) -> None:
    if int(t) != t or not 0 <= t <= K:
        raise ParameterError(f"t must be an integer in 0..{K}, got {t}")


def cache_size_from_t(N: int, K: int, t: int) -> Fraction:
    """Normalized cache size ``M = (N-1) t / K + 1`` of grid point ``t``."""
    _check_t(K, t)
    if N < 1 or K < 1:
        raise ParameterError("need N, K >= 1")
    return Fraction((N - 1) * int(t), K) + 1


def t_from_cache_size(N: int, K: int, M) -> float:
    """Inverse of :func:`cache_size_from_t`: ``t = K (M-1) / (N-1)`` (real valued)."""
    if N < 2:
        raise ParameterError("t is not determined by M when N = 1")
    return K * (M - 1) / (N - 1)


def memory_split(N: int, K: int, t: int) -> tuple[Fraction, Fraction]:
    """Data and key memory ``(M_D, M_K) = (N t / K, 1 - t / K)``."""
    _check_t(K, t)
    return Fraction(N * int(t), K), 1 - Fraction(int(t), K)


def grid_rate(K: int, t: int) -> Fraction:
    """Delivery rate of the scheme at grid point ``t``: ``C(K, t+1) / C(K, t)``."""
    _check_t(K, t)
    return Fraction(comb(K, t + 1), comb(K, t))


def centralized_rate(N: int, K: int, M) -> float:
    """Securely achievable centralized rate at cache size ``M``.

    On the grid ``M = (N-1) t / K + 1`` this is
    ``K (1 - (M-1)/(N-1)) / (1 + K (M-1)/(N-1))``; between grid points the
    lower convex envelope (here linear interpolation, the grid points being
    convex) is returned.
    """
    if M < 1:
        raise InfeasibleError("M < 1 infeasible under secure delivery")
    if M > N:
        raise ParameterError(f"M={M} exceeds N={N}")
    if M == N:
        return 0.0
    t_real = t_from_cache_size(N, K, M)
    lo = floor(t_real)
    if t_real - lo > 1 - _GRID_TOL:
        lo += 1
    frac = t_real - lo
    if frac < _GRID_TOL or lo >= K:
        return float(grid_rate(K, min(lo, K)))
    r0 = float(grid_rate(K, lo))
    r1 = float(grid_rate(K, lo + 1))
    return r0 + (r1 - r0) * frac


def rate_formula(N: int, K: int, M) -> float:
    """Closed form ``K (1 - x) / (1 + K x)`` with ``x = (M-1)/(N-1)``, any ``M`` in ``[1, N]``."""
    x = (M - 1) / (N - 1)
    return K * (1 - x) / (1 + K * x)


@dataclass
class CentralizedPlacement:
    params: SystemParams
    caches: list[UserCache]
    key_registry: KeyStore
    subfile_len: int
    subfile_sets: list[Subset] = field(default_factory=list)

    @property
    def t(self) -> int:
        return self.params.t

    def cache(self, k: int) -> UserCache:
        return self.caches[k - 1]


def split_file(block: BitBlock, K: int, t: int) -> dict[Subset, BitBlock]:
    """Cut a file into ``C(K, t)`` consecutive equal subfiles, in subset enumeration order."""
    subsets = enumerate_subsets(K, t)
    if block.length % len(subsets):
        raise ParameterError(f"file of {block.length} bits does not split into {len(subsets)}")
    L = block.length // len(subsets)
    return {tau: block.slice(i * L, (i + 1) * L) for i, tau in enumerate(subsets)}


def _subfile(library: FileLibrary, n: int, tau: Subset, K: int, L: int) -> BitBlock:
    i = subset_rank(tau, K)
    return library[n].slice(i * L, (i + 1) * L)


def place_centralized(
    library: FileLibrary, params: SystemParams, rng: np.random.Generator
) -> CentralizedPlacement:
    if params.scheme != CENTRALIZED:
        raise ParameterError("place_centralized needs centralized params")
    if library.N != params.N or library.F != params.F:
        raise ParameterError("library does not match params")
    N, K, t, F = params.N, params.K, params.t, params.F
    subfile_sets = enumerate_subsets(K, t)
    L = F // len(subfile_sets)

    keys = KeyStore()
    if t < K:
        for S in enumerate_subsets(K, t + 1):
            keys.generate(S, L, rng)

    budget = Fraction((N - 1) * t * F, K) + F
    caches = [UserCache(user=k, budget_bits=budget) for k in range(1, K + 1)]
    pieces = {n: split_file(library[n], K, t) for n in range(1, N + 1)}
    for cache in caches:
        k = cache.user
        for n in range(1, N + 1):
            for tau in subfile_sets:
                if k in tau:
                    cache.data[(n, tau)] = pieces[n][tau]
        for S, block in keys.items():
            if k in S:
                cache.keys[S] = block
    return CentralizedPlacement(params, caches, keys, L, subfile_sets)


def deliver_centralized(
    placement: CentralizedPlacement, library: FileLibrary, demand
) -> DeliveryPayload:
    params = placement.params
    N, K, t = params.N, params.K, params.t
    d = check_demand(demand, N, K)
    L = placement.subfile_len
    payload = DeliveryPayload(mode="coded")
    if t == K:
        return payload
    for S in enumerate_subsets(K, t + 1):
        if S not in placement.key_registry:
            raise IntegrityError(f"no key registered for {subset_label(S)}")
        key = placement.key_registry[S]
        parts = [
            _subfile(library, d[k - 1], tuple(j for j in S if j != k), K, L) for k in S
        ]
        payload.append(S, xor_all([key, *parts]))
    return payload


def decode_centralized(
    cache: UserCache, payload: DeliveryPayload, demand, k: int, params: SystemParams
) -> BitBlock:
    """Reassemble file ``W[d_k]`` at user ``k`` from its cache and the payload."""
    N, K, t = params.N, params.K, params.t
    d = check_demand(demand, N, K)
    want = d[k - 1]
    L = params.F // comb(K, t)
    parts = []
    for tau in enumerate_subsets(K, t):
        if k in tau:
            try:
                parts.append(cache.data[(want, tau)])
            except KeyError:
                raise IntegrityError(f"user {k} lacks subfile {want}{subset_label(tau)}") from None
            continue
        S = tuple(sorted((*tau, k)))
        record = payload.get(S)
        if record is None:
            raise IntegrityError(f"payload has no record for {subset_label(S)}")
        try:
            key = cache.keys[S]
            side = [cache.data[(d[j - 1], tuple(i for i in S if i != j))] for j in S if j != k]
        except KeyError as exc:
            raise IntegrityError(f"user {k} cache is missing {exc.args[0]!r}") from None
        parts.append(xor_all([record, key, *side]).truncate(L))
    return BitBlock.concat(parts)
