"""Checking that the multicast leaks nothing about the library.

Two tiers.  At toy sizes the joint distribution of (library, payload) is
enumerated exhaustively over every file realization and every key
realization, and ``I(X; W_1..W_N)`` is computed from exact integer counts.
At simulation sizes, :func:`structural_otp_audit` checks the premises the
zero-leakage argument relies on: one distinct, full-length, uniformly drawn
pad per record.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .centralized import deliver_centralized, place_centralized
from .core import (
    CENTRALIZED,
    BitBlock,
    DeliveryPayload,
    FileLibrary,
    KeyStore,
    ParameterError,
    Subset,
    SystemParams,
    check_demand,
    make_rng,
    subset_label,
)
from .decentralized import (
    _required_key_lengths,
    deliver_conventional,
    deliver_decentralized_coded,
    map_fragments,
    place_decentralized,
)

# Largest number of (library, key) realizations enumerated.
ENUMERATION_BOUND = 2**24


class AuditFailure(AssertionError):
    """A payload violates a one-time-pad premise."""


@dataclass
class TinyInstance:
    """A delivery reduced to a function of (files, keys) with placement held fixed.

    ``deliver`` maps a library and a dict of key blocks (one per entry of
    ``key_lengths``) to the payload the server would send.
    """

    N: int
    F: int
    key_lengths: dict[Subset, int]
    deliver: Callable[[FileLibrary, dict[Subset, BitBlock]], DeliveryPayload]
    params: SystemParams | None = None
    demand: tuple[int, ...] = ()
    label: str = ""

    @property
    def library_bits(self) -> int:
        return self.N * self.F

    @property
    def key_bits(self) -> int:
        return sum(self.key_lengths.values())

    @property
    def realizations(self) -> int:
        return 2 ** (self.library_bits + self.key_bits)


def _zero_library(N: int, F: int) -> FileLibrary:
    return FileLibrary(tuple(BitBlock(0, F) for _ in range(N)))


def _store(keys: dict[Subset, BitBlock]) -> KeyStore:
    store = KeyStore()
    for S, b in keys.items():
        store.put(S, b, kind="uniform")
    return store


def centralized_instance(params: SystemParams, demand, placement=None) -> TinyInstance:
    """Centralized delivery as a function of (files, keys); placement positions are file-independent."""
    d = check_demand(demand, params.N, params.K)
    if placement is None:
        placement = place_centralized(_zero_library(params.N, params.F), params, make_rng(params.seed))
    lengths = placement.key_registry.lengths()

    def deliver(library, keys):
        return deliver_centralized(replace(placement, key_registry=_store(keys)), library, d)

    return TinyInstance(params.N, params.F, lengths, deliver, params, d, "centralized")


def decentralized_instance(
    params: SystemParams, demand, mode: str = "coded", placement=None
) -> TinyInstance:
    """Hold one random placement fixed and expose coded or conventional delivery.

    Without ``placement`` the bit positions are drawn from ``params.seed``.
    Only the positions matter; the cached contents are never read.
    """
    d = check_demand(demand, params.N, params.K)
    if placement is None:
        placement = place_decentralized(_zero_library(params.N, params.F), params, make_rng(params.seed))
    fmap = placement.fragment_map or map_fragments(placement)
    base = replace(placement, fragment_map=fmap, demand_bound=d)
    if mode == "coded":
        lengths = _required_key_lengths(fmap, d)

        def deliver(library, keys):
            return deliver_decentralized_coded(replace(base, key_registry=_store(keys)), library, d)

    elif mode == "conventional":
        lengths = {(k,): params.F - placement.cached_per_file for k in range(1, params.K + 1)}

        def deliver(library, keys):
            return deliver_conventional(replace(base, conventional_keys=_store(keys)), library, d)

    else:
        raise ParameterError(f"unknown delivery mode {mode!r}")
    return TinyInstance(params.N, params.F, lengths, deliver, params, d, f"decentralized-{mode}")


def build_instance(params: SystemParams, demand, mode: str = "coded", placement=None) -> TinyInstance:
    if params.scheme == CENTRALIZED:
        return centralized_instance(params, demand, placement)
    return decentralized_instance(params, demand, mode, placement)


def _used_keys(inst: TinyInstance) -> list[Subset]:
    return [S for S, n in inst.key_lengths.items() if n > 0]


def with_key_reuse(inst: TinyInstance) -> TinyInstance:
    """Negative control: the second pad of some length is replaced by the first one."""
    used = _used_keys(inst)
    for i, a in enumerate(used):
        for b in used[i + 1 :]:
            if inst.key_lengths[a] == inst.key_lengths[b]:
                lengths = {S: n for S, n in inst.key_lengths.items() if S != b}

                def deliver(library, keys, a=a, b=b):
                    return inst.deliver(library, {**keys, b: keys[a]})

                return replace(inst, key_lengths=lengths, deliver=deliver, label=inst.label + "+reuse")
    raise ParameterError("instance has no two pads of equal length to reuse")


def with_key_removed(inst: TinyInstance, subset: Subset | None = None) -> TinyInstance:
    """Negative control: one pad (the first nonempty one by default) is replaced by zeros."""
    if subset is None:
        used = _used_keys(inst)
        if not used:
            raise ParameterError("instance uses no keys")
        subset = used[0]
    zero = BitBlock(0, inst.key_lengths[subset])
    lengths = {S: n for S, n in inst.key_lengths.items() if S != subset}

    def deliver(library, keys):
        return inst.deliver(library, {**keys, subset: zero})

    return replace(inst, key_lengths=lengths, deliver=deliver, label=inst.label + "+removed")


def without_keys(inst: TinyInstance) -> TinyInstance:
    """Unkeyed delivery: every pad is all zeros."""
    zeros = {S: BitBlock(0, n) for S, n in inst.key_lengths.items()}

    def deliver(library, keys):
        return inst.deliver(library, zeros)

    return replace(inst, key_lengths={}, deliver=deliver, label=inst.label + "+unkeyed")


def _split(value: int, lengths: list[int]) -> list[int]:
    out = []
    for n in lengths:
        out.append(value & ((1 << n) - 1))
        value >>= n
    return out


def _libraries(inst: TinyInstance):
    for w in range(2**inst.library_bits):
        yield w, FileLibrary(
            tuple(BitBlock(v, inst.F) for v in _split(w, [inst.F] * inst.N))
        )


def _key_sets(inst: TinyInstance):
    subsets = list(inst.key_lengths)
    lengths = [inst.key_lengths[S] for S in subsets]
    for kappa in range(2 ** sum(lengths)):
        yield {S: BitBlock(v, n) for S, v, n in zip(subsets, _split(kappa, lengths), lengths)}


def _check_bound(inst: TinyInstance, bound: int) -> None:
    if inst.realizations > bound:
        raise ParameterError(
            f"exhaustive enumeration needs 2^{inst.library_bits + inst.key_bits} "
            f"realizations, above the bound 2^{int(math.log2(bound))}"
        )


def payload_counts(inst: TinyInstance, bound: int = ENUMERATION_BOUND) -> list[Counter]:
    """For every library realization ``w`` (in index order), count payloads over all keys."""
    _check_bound(inst, bound)
    key_sets = list(_key_sets(inst))
    return [Counter(inst.deliver(lib, keys).canonical() for keys in key_sets) for _, lib in _libraries(inst)]


def mutual_information_from_counts(counts: list[Counter], n_keys: int) -> float:
    """``I(X; W)`` in bits for uniform ``W`` and uniform keys, from integer counts ``n(w, x)``.

    Returns exactly ``0.0`` whenever ``n(w, x) * |W| == c(x)`` for every ``w, x``
    (the conditional law of the payload does not depend on the library).
    """
    n_lib = len(counts)
    marginal: Counter = Counter()
    for c in counts:
        marginal.update(c)
    if all(c.get(x, 0) * n_lib == m for c in counts for x, m in marginal.items()):
        return 0.0
    total = 0.0
    for c in counts:
        for x, n in c.items():
            total += n * (math.log2(n * n_lib) - math.log2(marginal[x]))
    return max(total / (n_lib * n_keys), 0.0)


def mutual_information(inst: TinyInstance, bound: int = ENUMERATION_BOUND) -> float:
    return mutual_information_from_counts(payload_counts(inst, bound), 2**inst.key_bits)


def exact_leakage(
    params: SystemParams, demand, mode: str = "coded", bound: int = ENUMERATION_BOUND
) -> float:
    """Exact ``I(X; W_1..W_N)`` in bits for a toy instance of either scheme."""
    return mutual_information(build_instance(params, demand, mode), bound)


def library_posterior(payload: DeliveryPayload, inst: TinyInstance, bound: int = ENUMERATION_BOUND) -> np.ndarray:
    """Posterior over all ``2^(N F)`` libraries given an observed payload (uniform prior)."""
    _check_bound(inst, bound)
    target = payload.canonical()
    key_sets = list(_key_sets(inst))
    hits = np.array(
        [sum(inst.deliver(lib, keys).canonical() == target for keys in key_sets) for _, lib in _libraries(inst)],
        dtype=float,
    )
    if hits.sum() == 0:
        raise ParameterError("payload cannot be produced by this instance")
    return hits / hits.sum()


def wiretap_reconstruction_attack(payload: DeliveryPayload, inst: TinyInstance) -> bool:
    """Bayes-update over every library from the payload alone; succeeds iff the posterior is not uniform."""
    post = library_posterior(payload, inst)
    return bool(np.any(post != post[0]))


# --------------------------------------------------------------------------
# Structural audit
# --------------------------------------------------------------------------


@dataclass
class AuditReport:
    pads_registered: bool = True
    pads_unique: bool = True
    lengths_match: bool = True
    uniform_provenance: bool = True
    n_records: int = 0
    n_keys: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def raise_for_failures(self) -> None:
        if self.failures:
            raise AuditFailure("; ".join(self.failures))

    def flags(self) -> dict:
        return {
            "pads_registered": self.pads_registered,
            "pads_unique": self.pads_unique,
            "lengths_match": self.lengths_match,
            "uniform_provenance": self.uniform_provenance,
            "n_records": self.n_records,
            "n_keys": self.n_keys,
        }


def structural_otp_audit(payload: DeliveryPayload, key_registry: KeyStore) -> AuditReport:
    """Check that every record is padded by its own registered, full-length, uniformly drawn key."""
    rep = AuditReport(n_records=len(payload), n_keys=len(key_registry))
    seen: dict = {}
    for S, block in payload:
        name = subset_label(S)
        if S not in key_registry:
            rep.pads_registered = False
            rep.failures.append(f"pad missing: no registry key for record {name}")
            continue
        tag = key_registry.tag(S)
        if tag in seen:
            rep.pads_unique = False
            rep.failures.append(f"pad reuse: records {subset_label(seen[tag])} and {name} share a key")
        seen[tag] = S
        if key_registry[S].length != block.length:
            rep.lengths_match = False
            rep.failures.append(
                f"pad length: key {name} has {key_registry[S].length} bits, record has {block.length}"
            )
        if tag[0] != "uniform":
            rep.uniform_provenance = False
            rep.failures.append(f"pad provenance: key {name} was not drawn from the uniform generator")
    return rep


@dataclass
class LeakageReport:
    params: SystemParams
    demand: tuple[int, ...]
    method: str
    mutual_information_bits: float | None
    audits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "demand": list(self.demand),
            "method": self.method,
            "mutual_information_bits": self.mutual_information_bits,
            "audits": self.audits,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def structural_report(
    params: SystemParams, demand, payload: DeliveryPayload, key_registry: KeyStore
) -> LeakageReport:
    """Leakage report for a payload too large to enumerate.

    ``mutual_information_bits`` is 0 when every pad premise holds and
    ``None`` otherwise; the audit flags say which premise broke.
    """
    audit = structural_otp_audit(payload, key_registry)
    flags = audit.flags()
    flags["failures"] = list(audit.failures)
    mi = 0.0 if audit.passed else None
    return LeakageReport(params, tuple(demand), "structural", mi, flags)


def leakage_report(params: SystemParams, demand, mode: str = "coded") -> LeakageReport:
    """Exhaustive leakage plus a structural audit of one concrete run of the same instance."""
    inst = build_instance(params, demand, mode)
    mi = mutual_information(inst)
    rng = make_rng(params.seed + 1)
    library = FileLibrary.random(params.N, params.F, rng)
    keys = KeyStore()
    for S, n in inst.key_lengths.items():
        keys.generate(S, n, rng)
    payload = inst.deliver(library, {S: b for S, b in keys.items()})
    audit = structural_otp_audit(payload, keys)
    flags = audit.flags()
    flags["failures"] = list(audit.failures)
    return LeakageReport(params, inst.demand, "exhaustive", mi, flags)


__all__ = [
    "AuditFailure",
    "AuditReport",
    "LeakageReport",
    "TinyInstance",
    "build_instance",
    "centralized_instance",
    "decentralized_instance",
    "with_key_reuse",
    "with_key_removed",
    "without_keys",
    "payload_counts",
    "mutual_information",
    "mutual_information_from_counts",
    "exact_leakage",
    "library_posterior",
    "wiretap_reconstruction_attack",
    "structural_otp_audit",
    "leakage_report",
    "structural_report",
]
