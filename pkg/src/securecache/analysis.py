"""Rate bounds, gap certification and key/data memory trade-offs.

All functions here are pure functions of ``(N, K, M)``; nothing is
simulated.  Sweeps are vectorized with numpy per ``(N, K)`` pair.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from .centralized import centralized_rate
from .core import CENTRALIZED, DECENTRALIZED, InfeasibleError, ParameterError
from .decentralized import decentralized_rate

CSV_HEADER = ["scheme", "N", "K", "M", "R_secure", "R_baseline", "R_lower", "gap", "regime_valid"]

# Constant multiplicative gap guaranteed inside the bounded regimes.
GAP_BOUND = 17.0


# --------------------------------------------------------------------------
# Lower bound and baseline
# --------------------------------------------------------------------------


def _cut_terms(N: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Cut sizes ``s`` with ``floor(N/s) >= 2`` and the matching ``floor(N/s) - 1``."""
    s = np.arange(1, min(N, K) + 1)
    f = N // s
    keep = f >= 2
    return s[keep].astype(float), (f[keep] - 1).astype(float)


def lower_bound(N: int, K: int, M) -> float:
    """Cut-set lower bound on the optimal secure rate.

    ``max_s s - s (M-1) / (floor(N/s) - 1)`` over ``s`` in ``1..min(N, K)``;
    cuts with ``floor(N/s) = 1`` carry no rate constraint and are skipped,
    and the result is floored at zero.
    """
    if M < 1:
        raise InfeasibleError("M < 1 infeasible under secure delivery")
    if M > N:
        raise ParameterError(f"M={M} exceeds N={N}")
    return float(lower_bound_array(N, K, np.array([M], dtype=float))[0])


def lower_bound_array(N: int, K: int, M: np.ndarray) -> np.ndarray:
    s, fm1 = _cut_terms(N, K)
    M = np.asarray(M, dtype=float)
    if s.size == 0:
        return np.zeros_like(M)
    terms = s[None, :] - s[None, :] * (M[:, None] - 1) / fm1[None, :]
    return np.maximum(terms.max(axis=1), 0.0)


def centralized_rate_array(N: int, K: int, M: np.ndarray) -> np.ndarray:
    """Vectorized :func:`centralized_rate` (lower convex envelope of the grid points)."""
    M = np.asarray(M, dtype=float)
    if N == 1:
        return np.zeros_like(M)
    t = np.arange(K + 1)
    grid = (K - t) / (t + 1)
    return np.interp(K * (M - 1) / (N - 1), t, grid)


def decentralized_rate_array(N: int, K: int, M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    out = np.full_like(M, float(K))
    inner = M > 1
    q = (M[inner] - 1) / (N - 1)
    out[inner] = K * (1 - q) * np.minimum((1 - (1 - q) ** K) / (K * q), 1.0)
    out[M >= N] = 0.0
    return out


def nonsecure_baseline_rate(N: int, K: int, M) -> float:
    """Rate of coded caching without a wiretapper: ``K (1 - M/N) / (1 + K M / N)`` on ``M = N t / K``.

    Between grid points the curve is interpolated linearly (the grid points
    are convex, so this is their lower convex envelope).
    """
    if not 0 <= M <= N:
        raise ParameterError(f"M={M} outside [0, {N}]")
    return float(baseline_rate_array(N, K, np.array([M], dtype=float))[0])


def baseline_rate_array(N: int, K: int, M: np.ndarray) -> np.ndarray:
    t = np.arange(K + 1)
    return np.interp(K * np.asarray(M, dtype=float) / N, t, (K - t) / (t + 1))


# --------------------------------------------------------------------------
# Gaps
# --------------------------------------------------------------------------


def centralized_regime_floor(N: int, K: int) -> float:
    """Smallest ``M`` of the bounded-gap regime for the centralized scheme."""
    return max((K - N) * (N - 1) / (K * N) + 1, 1.0)


def decentralized_regime_floor(N: int) -> float:
    return (N - 1) / N + 1


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(num.shape, np.inf)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    out[(den <= 0) & (num <= 0)] = 1.0
    return out


@dataclass(frozen=True)
class GapResult:
    ratio: float
    regime_valid: bool
    ratio_to_centralized: float | None = None

    @property
    def label(self) -> str:
        return "bounded regime" if self.regime_valid else "unbounded regime"


def gap_centralized(N: int, K: int, M) -> GapResult:
    """Ratio of the centralized achievable rate to the lower bound, with a regime flag.

    Both rates vanish at ``M = N``; the ratio is then defined as 1.
    """
    r = centralized_rate(N, K, M)
    lb = lower_bound(N, K, M)
    ratio = float(_ratio(np.array([r]), np.array([lb]))[0])
    valid = centralized_regime_floor(N, K) - 1e-12 <= M <= N
    return GapResult(ratio, valid)


def gap_decentralized(N: int, K: int, M) -> GapResult:
    """Decentralized rate over the lower bound, plus its ratio to the centralized rate."""
    rd = decentralized_rate(N, K, M)
    lb = lower_bound(N, K, M)
    rc = centralized_rate(N, K, M)
    ratio = float(_ratio(np.array([rd]), np.array([lb]))[0])
    to_c = float(_ratio(np.array([rd]), np.array([rc]))[0])
    valid = N >= 2 and decentralized_regime_floor(N) - 1e-12 <= M <= N
    return GapResult(ratio, valid, to_c)


@dataclass
class GapSweep:
    """Summary of a gap certification sweep over a grid of ``(N, K)``."""

    scheme: str
    n_max: int
    k_max: int
    points: int = 0
    max_ratio: float = 0.0
    argmax: tuple = ()
    max_ratio_k_lt_n: float = 0.0
    max_ratio_k_gt_n: float = 0.0
    max_ratio_k_eq_n: float = 0.0
    max_ratio_to_centralized: float | None = None
    per_pair: dict = field(default_factory=dict, repr=False)

    @property
    def certified(self) -> bool:
        ok = self.max_ratio <= GAP_BOUND
        if self.max_ratio_to_centralized is not None:
            ok = ok and self.max_ratio_to_centralized <= GAP_BOUND
        return ok

    def _update(self, N, K, M, ratios):
        self.points += ratios.size
        i = int(np.argmax(ratios))
        peak = float(ratios[i])
        self.per_pair[(N, K)] = peak
        if peak > self.max_ratio:
            self.max_ratio = peak
            self.argmax = (N, K, float(M[i]))
        if K < N:
            self.max_ratio_k_lt_n = max(self.max_ratio_k_lt_n, peak)
        elif K > N:
            self.max_ratio_k_gt_n = max(self.max_ratio_k_gt_n, peak)
        else:
            self.max_ratio_k_eq_n = max(self.max_ratio_k_eq_n, peak)


def centralized_grid(N: int, K: int) -> np.ndarray:
    """Grid cache sizes ``(N-1) t / K + 1`` for ``t = 0..K``."""
    return (N - 1) * np.arange(K + 1) / K + 1


def decentralized_grid(N: int) -> np.ndarray:
    """Cache sizes ``(N-1) t / N + 1`` for integer data memory ``t = 1..N``."""
    return (N - 1) * np.arange(1, N + 1) / N + 1


def certify_gap_centralized(n_max: int, k_max: int, n_min: int = 1, k_min: int = 1) -> GapSweep:
    """Max of achievable/lower-bound over every grid ``M`` in the bounded regime."""
    sweep = GapSweep(CENTRALIZED, n_max, k_max)
    for N in range(n_min, n_max + 1):
        for K in range(k_min, k_max + 1):
            M = centralized_grid(N, K)
            M = np.unique(M[M >= centralized_regime_floor(N, K) - 1e-12])
            if N == 1:
                M = np.array([1.0])
            ratios = _ratio(centralized_rate_array(N, K, M), lower_bound_array(N, K, M))
            sweep._update(N, K, M, ratios)
    return sweep


def certify_gap_decentralized(n_max: int, k_max: int, n_min: int = 2, k_min: int = 1) -> GapSweep:
    """Same for the decentralized scheme over ``M = (N-1) t / N + 1``, ``t = 1..N``.

    Also tracks the decentralized-to-centralized ratio at the same points.
    """
    sweep = GapSweep(DECENTRALIZED, n_max, k_max, max_ratio_to_centralized=0.0)
    for N in range(max(n_min, 2), n_max + 1):
        M = decentralized_grid(N)
        for K in range(k_min, k_max + 1):
            rd = decentralized_rate_array(N, K, M)
            ratios = _ratio(rd, lower_bound_array(N, K, M))
            sweep._update(N, K, M, ratios)
            to_c = _ratio(rd, centralized_rate_array(N, K, M))
            sweep.max_ratio_to_centralized = max(sweep.max_ratio_to_centralized, float(to_c.max()))
    return sweep


# --------------------------------------------------------------------------
# Cost of security
# --------------------------------------------------------------------------


def max_security_cost(N: int, K: int) -> float:
    """``max over M in [1, N]`` of centralized secure rate minus the non-secure baseline.

    Both curves are piecewise linear, so the maximum sits on a breakpoint of one of them.
    """
    secure_pts = centralized_grid(N, K)
    base_pts = N * np.arange(K + 1) / K
    M = np.unique(np.concatenate([secure_pts, base_pts[base_pts >= 1]]))
    return float(np.max(centralized_rate_array(N, K, M) - baseline_rate_array(N, K, M)))


def max_decentralization_cost(N: int, K: int, samples: int = 20001) -> float:
    """``max over M in [1, N]`` of decentralized minus centralized secure rate (dense sampling)."""
    M = np.unique(np.concatenate([np.linspace(1, N, samples), centralized_grid(N, K)]))
    return float(np.max(decentralized_rate_array(N, K, M) - centralized_rate_array(N, K, M)))


# --------------------------------------------------------------------------
# Key memory vs data memory
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyMemorySplit:
    t: int
    M: float
    M_D: float
    M_K: float
    num_keys: int
    exposure_threshold: int | None
    regime: str
    data_dominates: bool
    multi_key: bool
    below_single_key_bound: bool
    desirable: bool

    def to_dict(self) -> dict:
        return asdict(self)


def compromise_exposure(K: int, t: int, r: int) -> bool:
    """Does access to any ``r`` caches reveal every ``(t+1)``-subset key?  True iff ``t >= K - r``."""
    if not 0 <= t <= K - 1:
        raise ParameterError(f"t={t} outside 0..{K - 1}")
    if not 0 <= r <= K:
        raise ParameterError(f"r={r} outside 0..{K}")
    return t >= K - r


def compromise_exposure_bruteforce(K: int, t: int, r: int) -> bool:
    """Enumerate every compromised ``r``-set and every key subset; exposed iff each key is hit by each set."""
    users = range(1, K + 1)
    key_sets = [frozenset(S) for S in itertools.combinations(users, t + 1)]
    for R in itertools.combinations(users, r):
        Rs = set(R)
        if any(not (S & Rs) for S in key_sets):
            return False
    return True


def exposure_threshold(K: int, t: int) -> int | None:
    """Fewest compromised caches that expose all keys; ``None`` when there are no keys (``t = K``)."""
    if t >= K:
        return None
    return K - t


def keymem_tradeoff(N: int, K: int) -> list[KeyMemorySplit]:
    """One row per grid point ``t = 0..K`` describing the data/key split of the cache."""
    if N < 2 or K < 1:
        raise ParameterError("keymem_tradeoff needs N >= 2 and K >= 1")
    lo = 2 * N / (N + 1)
    hi = (N - 1) * (K - 1) / K + 1
    rows = []
    for t in range(K + 1):
        M = (N - 1) * t / K + 1
        num_keys = comb(K, t + 1)
        r_star = exposure_threshold(K, t)
        regime = f"regime {t + 1}" if r_star is not None else "no keys"
        rows.append(
            KeyMemorySplit(
                t=t,
                M=M,
                M_D=N * t / K,
                M_K=1 - t / K,
                num_keys=num_keys,
                exposure_threshold=r_star,
                regime=regime,
                data_dominates=M >= lo - 1e-12,
                multi_key=num_keys >= 2,
                below_single_key_bound=M <= hi + 1e-12,
                desirable=lo - 1e-12 <= M <= hi + 1e-12,
            )
        )
    return rows


# --------------------------------------------------------------------------
# Curves and CSV
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    scheme: str
    N: int
    K: int
    M: float
    R_secure: float
    R_baseline: float | None
    R_lower: float
    gap: float
    regime_valid: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list[str]:
        def num(x):
            return "" if x is None else format(x, ".12g")

        return [
            self.scheme,
            str(self.N),
            str(self.K),
            num(self.M),
            num(self.R_secure),
            num(self.R_baseline),
            num(self.R_lower),
            num(self.gap),
            "true" if self.regime_valid else "false",
        ]


def rate_report(scheme: str, N: int, K: int, M) -> RateReport:
    if scheme == CENTRALIZED:
        g = gap_centralized(N, K, M)
        r = centralized_rate(N, K, M)
    elif scheme == DECENTRALIZED:
        g = gap_decentralized(N, K, M)
        r = decentralized_rate(N, K, M)
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    return RateReport(
        scheme=scheme,
        N=N,
        K=K,
        M=float(M),
        R_secure=r,
        R_baseline=nonsecure_baseline_rate(N, K, M),
        R_lower=lower_bound(N, K, M),
        gap=g.ratio,
        regime_valid=g.regime_valid,
    )


def default_m_grid(N: int, K: int, schemes=(CENTRALIZED, DECENTRALIZED)) -> list[float]:
    pts = set()
    if CENTRALIZED in schemes:
        pts.update(float(m) for m in centralized_grid(N, K))
    if DECENTRALIZED in schemes and N >= 2:
        pts.update(float(m) for m in decentralized_grid(N))
        pts.add(1.0)
    return sorted(pts)


def tradeoff_curve(N: int, K: int, schemes=(CENTRALIZED, DECENTRALIZED), m_grid=None) -> list[RateReport]:
    """Rows ordered by ``(scheme, M)`` for plotting secure, baseline and lower-bound curves."""
    grid = sorted(set(float(m) for m in (m_grid if m_grid is not None else default_m_grid(N, K, schemes))))
    return [rate_report(s, N, K, M) for s in sorted(schemes) for M in grid]


def write_csv(reports, stream=None) -> str:
    """Write rate reports as CSV; returns the text when no stream is given."""
    own = stream is None
    out = io.StringIO() if own else stream
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rep in reports:
        w.writerow(rep.csv_row())
    return out.getvalue() if own else ""
