"""Command-line interface: ``python -m securecache <command>``.

Commands
--------
rate       achievable rate, lower bound and gap at one cache size (JSON)
simulate   placement, delivery, decoding and checks on random files (JSON)
tradeoff   memory-rate curves on a grid of cache sizes (CSV)
gap        per-(N, K) worst gap over a sweep (CSV)
keymem     data/key split of the cache at every grid point (CSV)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import analysis
from .centralized import decode_centralized, deliver_centralized, grid_rate, place_centralized
from .core import (
    CENTRALIZED,
    DECENTRALIZED,
    SCHEMES,
    ConfigurationError,
    FileLibrary,
    InfeasibleError,
    IntegrityError,
    ParameterError,
    SystemParams,
    check_demand,
    make_rng,
    worst_case_demand,
)
from .decentralized import (
    decentralized_rate,
    decode_conventional,
    decode_decentralized,
    place_decentralized,
    serve_decentralized,
)
from .secrecy import build_instance, mutual_information, structural_report

CHECKS = ("decode", "secrecy", "memory", "rate")
INFEASIBLE_MSG = "M < 1 infeasible under secure delivery"
# Relative tolerance for the randomized (decentralized) rate and memory checks.
STAT_TOL = 0.05
# simulate switches from exhaustive to structural secrecy checking above this
# many (library, key) realizations; enumeration runs in pure Python.
AUTO_EXHAUSTIVE_LIMIT = 2**16


class CommandError(Exception):
    """Raised for user-facing failures; carries the exit status."""

    def __init__(self, message: str, status: int = 2):
        super().__init__(message)
        self.status = status


# --------------------------------------------------------------------------
# Experiment configuration
# --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    scheme: str
    N: int
    K: int
    F: int
    t: float | None = None
    M: float | None = None
    seed: int = 0
    demand: tuple[int, ...] | None = None
    checks: tuple[str, ...] = field(default_factory=lambda: CHECKS)

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        """Parse a JSON-style mapping; errors name the offending field."""
        known = {"scheme", "N", "K", "F", "t", "M", "seed", "demand", "checks"}
        extra = sorted(set(raw) - known)
        if extra:
            raise ConfigurationError(f"unknown config field(s): {', '.join(extra)}")
        for name in ("scheme", "N", "K", "F"):
            if raw.get(name) is None:
                raise ConfigurationError(f"config field '{name}' is required")
        if raw["scheme"] not in SCHEMES:
            raise ConfigurationError(f"config field 'scheme' must be one of {', '.join(SCHEMES)}")
        vals = {}
        for name in ("N", "K", "F", "seed"):
            if raw.get(name) is None:
                continue
            try:
                vals[name] = _as_int(raw[name])
            except (TypeError, ValueError):
                raise ConfigurationError(f"config field '{name}' must be an integer") from None
        for name in ("t", "M"):
            if raw.get(name) is not None:
                try:
                    vals[name] = _as_number(raw[name])
                except (TypeError, ValueError, ZeroDivisionError):
                    raise ConfigurationError(f"config field '{name}' must be a number") from None
        if ("t" in vals) == ("M" in vals):
            raise ConfigurationError("exactly one of config fields 't' and 'M' is required")
        demand = raw.get("demand")
        if demand is not None:
            if isinstance(demand, str):
                demand = _parse_int_list(demand, "demand")
            try:
                demand = tuple(_as_int(x) for x in demand)
            except (TypeError, ValueError):
                raise ConfigurationError("config field 'demand' must be a list of integers") from None
        checks = raw.get("checks", CHECKS)
        if isinstance(checks, str):
            checks = [c.strip() for c in checks.split(",") if c.strip()]
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            raise ConfigurationError(f"config field 'checks' has unknown check(s): {', '.join(bad)}")
        return cls(
            scheme=raw["scheme"],
            N=vals["N"],
            K=vals["K"],
            F=vals["F"],
            t=vals.get("t"),
            M=vals.get("M"),
            seed=vals.get("seed", 0),
            demand=demand,
            checks=tuple(checks),
        )

    def params(self) -> SystemParams:
        if self.M is not None:
            return SystemParams.from_memory(self.scheme, self.N, self.K, self.F, self.M, self.seed)
        return SystemParams(self.scheme, self.N, self.K, self.F, self.t, self.seed)

    def resolved_demand(self) -> tuple[int, ...]:
        if self.demand is None:
            return worst_case_demand(self.N, self.K)
        return check_demand(self.demand, self.N, self.K)


def _as_int(x) -> int:
    if isinstance(x, bool):
        raise TypeError("bool is not an integer")
    if isinstance(x, float) and not x.is_integer():
        raise ValueError(f"{x} is not an integer")
    return int(x)


def _as_number(x) -> float:
    """Accept ints, floats and fraction strings such as ``"5/3"``."""
    if isinstance(x, bool):
        raise TypeError("bool is not a number")
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


def _parse_int_list(text: str, name: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigurationError(f"'{name}' must be a comma-separated list of integers") from None


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig, dump_path: str | None = None) -> dict:
    """Run placement, delivery and all-user decoding; evaluate the requested checks."""
    params = cfg.params()
    d = cfg.resolved_demand()
    N, K, F = params.N, params.K, params.F
    rng = make_rng(params.seed)
    library = FileLibrary.random(N, F, rng)

    if params.scheme == CENTRALIZED:
        placement = place_centralized(library, params, rng)
        payload = deliver_centralized(placement, library, d)
        registry = placement.key_registry
        decoded = {}
        for cache in placement.caches:
            try:
                decoded[cache.user] = decode_centralized(cache, payload, d, cache.user, params)
            except IntegrityError:
                decoded[cache.user] = None
        expected_rate = float(grid_rate(K, params.t)) if params.t < K else 0.0
        mode = "coded"
    else:
        placement = place_decentralized(library, params, rng)
        payload = serve_decentralized(placement, library, d, rng)
        mode = payload.mode
        registry = placement.key_registry if mode == "coded" else placement.conventional_keys
        decoded = {}
        for cache in placement.caches:
            try:
                if mode == "coded":
                    decoded[cache.user] = decode_decentralized(
                        cache, payload, d, cache.user, placement.fragment_map
                    )
                else:
                    decoded[cache.user] = decode_conventional(cache, payload, d, cache.user)
            except IntegrityError:
                decoded[cache.user] = None
        expected_rate = decentralized_rate(N, K, params.M)

    measured_rate = payload.rate(F)
    stored = [c.stored_bits for c in placement.caches]
    budget = params.M * F
    checks: dict[str, dict] = {}

    if "decode" in cfg.checks:
        failed = [k for k in range(1, K + 1) if decoded[k] != library[d[k - 1]]]
        checks["decode"] = {"passed": not failed, "failed_users": failed}

    if "memory" in cfg.checks:
        if params.scheme == CENTRALIZED:
            exact = Fraction((N - 1) * params.t * F, K) + F
            ok = all(s == exact for s in stored)
            checks["memory"] = {"passed": ok, "budget_bits": float(exact), "tolerance": 0.0}
        else:
            dev = max(abs(s / budget - 1) for s in stored)
            checks["memory"] = {
                "passed": dev <= STAT_TOL,
                "budget_bits": budget,
                "max_relative_deviation": dev,
                "tolerance": STAT_TOL,
            }

    if "rate" in cfg.checks:
        if params.scheme == CENTRALIZED:
            ok = Fraction(payload.total_bits, F) == (grid_rate(K, params.t) if params.t < K else 0)
            checks["rate"] = {"passed": ok, "expected": expected_rate, "tolerance": 0.0}
        else:
            if expected_rate == 0:
                ok = measured_rate == 0
                dev = measured_rate
            else:
                dev = abs(measured_rate / expected_rate - 1)
                ok = dev <= STAT_TOL
            checks["rate"] = {
                "passed": ok,
                "expected": expected_rate,
                "relative_deviation": dev,
                "tolerance": STAT_TOL,
            }

    if "secrecy" in cfg.checks:
        inst = build_instance(params, d, mode, placement)
        if inst.realizations <= AUTO_EXHAUSTIVE_LIMIT:
            mi = mutual_information(inst)
            checks["secrecy"] = {
                "passed": mi <= 1e-12,
                "method": "exhaustive",
                "mutual_information_bits": mi,
            }
        else:
            rep = structural_report(params, d, payload, registry)
            checks["secrecy"] = {
                "passed": rep.mutual_information_bits == 0.0,
                "method": "structural",
                "mutual_information_bits": rep.mutual_information_bits,
                "audits": rep.audits,
            }

    if dump_path:
        with open(dump_path, "wb") as fh:
            payload.dump(fh)

    return {
        "params": params.to_dict(),
        "demand": list(d),
        "delivery_mode": mode,
        "records": len(payload),
        "payload_bits": payload.total_bits,
        "measured_rate": measured_rate,
        "expected_rate": expected_rate,
        "measured_memory": max(stored) / F,
        "memory_budget": params.M,
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
    }


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CommandError(f"cannot write {out}: {exc.strerror}") from None


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("SECURECACHE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CommandError(f"SECURECACHE_SEED must be an integer, got {env!r}") from None


def cmd_rate(args) -> int:
    if args.m is None and args.t is None:
        raise CommandError("one of --m or --t is required")
    if args.m is not None:
        M = _as_number(args.m)
    elif args.scheme == CENTRALIZED:
        M = (args.n - 1) * args.t / args.k + 1
    else:
        M = (args.n - 1) * args.t / args.n + 1
    if M < 1:
        raise CommandError(INFEASIBLE_MSG)
    if M > args.n:
        raise CommandError(f"M={M} exceeds N={args.n}")
    rep = analysis.rate_report(args.scheme, args.n, args.k, M)
    _emit(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise CommandError(f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CommandError(f"{args.config} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise CommandError("config file must hold a JSON object")
    overrides = {
        "scheme": args.scheme,
        "N": args.n,
        "K": args.k,
        "F": args.f,
        "t": args.t,
        "M": args.m,
        "demand": args.demand,
        "checks": args.check,
    }
    for key, val in overrides.items():
        if val is not None:
            raw[key] = val
            if key == "t":
                raw.pop("M", None)
            if key == "M":
                raw.pop("t", None)
    if args.seed is not None or "seed" not in raw:
        raw["seed"] = _seed(args.seed)
    cfg = ExperimentConfig.from_dict(raw)
    report = run_experiment(cfg, args.dump)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    failed = [name for name, c in report["checks"].items() if not c["passed"]]
    if failed:
        print(f"check failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_tradeoff(args) -> int:
    schemes = tuple(args.schemes.split(",")) if args.schemes else SCHEMES
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise CommandError(f"unknown scheme(s): {', '.join(bad)}")
    if DECENTRALIZED in schemes and args.n < 2:
        raise CommandError("the decentralized scheme needs N >= 2")
    grid = None
    if args.points:
        grid = [1 + (args.n - 1) * i / (args.points - 1) for i in range(args.points)]
    reports = analysis.tradeoff_curve(args.n, args.k, schemes, grid)
    _emit(analysis.write_csv(reports), args.out)
    return 0


GAP_HEADER = ["scheme", "N", "K", "max_gap", "certified_bound"]


def cmd_gap(args) -> int:
    schemes = (args.scheme,) if args.scheme else SCHEMES
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAP_HEADER)
    summary = {}
    for scheme in schemes:
        if scheme == CENTRALIZED:
            sweep = analysis.certify_gap_centralized(args.n_max, args.k_max)
        else:
            sweep = analysis.certify_gap_decentralized(args.n_max, args.k_max)
        for (N, K), peak in sorted(sweep.per_pair.items()):
            w.writerow([scheme, N, K, format(peak, ".12g"), format(analysis.GAP_BOUND, "g")])
        summary[scheme] = {
            "max_gap": sweep.max_ratio,
            "argmax": list(sweep.argmax),
            "max_gap_k_lt_n": sweep.max_ratio_k_lt_n,
            "max_gap_k_gt_n": sweep.max_ratio_k_gt_n,
            "certified": sweep.certified,
        }
    _emit(buf.getvalue(), args.out)
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return 0 if all(s["certified"] for s in summary.values()) else 1


KEYMEM_HEADER = [
    "t",
    "M",
    "M_D",
    "M_K",
    "num_keys",
    "exposure_threshold",
    "regime",
    "data_dominates",
    "multi_key",
    "below_single_key_bound",
    "desirable",
]


def cmd_keymem(args) -> int:
    rows = analysis.keymem_tradeoff(args.n, args.k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KEYMEM_HEADER)
    for r in rows:
        d = r.to_dict()
        cells = []
        for name in KEYMEM_HEADER:
            v = d[name]
            if isinstance(v, bool):
                cells.append("true" if v else "false")
            elif isinstance(v, float):
                cells.append(format(v, ".12g"))
            elif v is None:
                cells.append("")
            else:
                cells.append(str(v))
        w.writerow(cells)
    _emit(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="securecache", description="Secure coded caching toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rate", help="rate, lower bound and gap at one cache size")
    r.add_argument("--scheme", choices=SCHEMES, default=CENTRALIZED)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--m", help="cache size in files (decimal or fraction such as 5/3)")
    r.add_argument("--t", type=float)
    r.add_argument("--out")
    r.set_defaults(func=cmd_rate)

    s = sub.add_parser("simulate", help="run one experiment end to end")
    s.add_argument("config", nargs="?", help="JSON experiment config")
    s.add_argument("--scheme", choices=SCHEMES)
    s.add_argument("--n", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--f", type=int)
    s.add_argument("--t", type=float)
    s.add_argument("--m")
    s.add_argument("--seed", type=int)
    s.add_argument("--demand", help="comma-separated file indices, e.g. 1,2,3")
    s.add_argument("--check", help="comma-separated subset of decode,secrecy,memory,rate")
    s.add_argument("--out")
    s.add_argument("--dump", help="write the binary payload here")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tradeoff", help="memory-rate curves as CSV")
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--k", type=int, required=True)
    t.add_argument("--schemes", help="comma-separated schemes (default both)")
    t.add_argument("--points", type=int, help="uniform grid size instead of the scheme grid points")
    t.add_argument("--out")
    t.set_defaults(func=cmd_tradeoff)

    g = sub.add_parser("gap", help="worst gap to the lower bound per (N, K) as CSV")
    g.add_argument("--n-max", type=int, required=True)
    g.add_argument("--k-max", type=int, required=True)
    g.add_argument("--scheme", choices=SCHEMES)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gap)

    k = sub.add_parser("keymem", help="data/key memory split per grid point as CSV")
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--k", type=int, required=True)
    k.add_argument("--out")
    k.set_defaults(func=cmd_keymem)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status
    except InfeasibleError:
        print(f"error: {INFEASIBLE_MSG}", file=sys.stderr)
        return 2
    except (ParameterError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
