"""Secure coded caching: placement, one-time-padded delivery, bounds and secrecy checks."""

from .analysis import (
    certify_gap_centralized,
    certify_gap_decentralized,
    compromise_exposure,
    gap_centralized,
    gap_decentralized,
    keymem_tradeoff,
    lower_bound,
    nonsecure_baseline_rate,
    rate_report,
    tradeoff_curve,
)
from .centralized import (
    cache_size_from_t,
    centralized_rate,
    decode_centralized,
    deliver_centralized,
    place_centralized,
)
from .core import (
    CENTRALIZED,
    DECENTRALIZED,
    BitBlock,
    ConfigurationError,
    DeliveryPayload,
    FileLibrary,
    InfeasibleError,
    IntegrityError,
    KeyStore,
    ParameterError,
    SystemParams,
    UserCache,
    gen_uniform_block,
    make_rng,
    worst_case_demand,
    xor_pad,
)
from .decentralized import (
    decentralized_rate,
    decode_conventional,
    decode_decentralized,
    deliver_conventional,
    deliver_decentralized_coded,
    map_fragments,
    place_decentralized,
    place_keys_decentralized,
    serve_decentralized,
)
from .secrecy import (
    AuditFailure,
    LeakageReport,
    exact_leakage,
    leakage_report,
    structural_otp_audit,
    wiretap_reconstruction_attack,
)

__version__ = "0.1.0"
