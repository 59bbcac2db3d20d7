"""What does the eavesdropper learn?

At toy sizes we enumerate every library and every key and compute the
mutual information between the multicast and the files.  It is zero for
the real schemes and positive as soon as a pad is dropped or reused.
Then we audit a full-size payload structurally.

    python3 demos/wiretap_check.py
"""

from securecache import FileLibrary, ParameterError, SystemParams, make_rng, place_decentralized, serve_decentralized
from securecache.secrecy import (
    build_instance,
    leakage_report,
    mutual_information,
    structural_otp_audit,
    with_key_removed,
    with_key_reuse,
    without_keys,
)


def leak_table():
    cases = [
        ("2 files, 2 users, t=1", SystemParams("centralized", 2, 2, 2, 1), (1, 2)),
        ("3 files, 3 users, t=1", SystemParams("centralized", 3, 3, 3, 1), (1, 2, 3)),
        ("random placement N=K=2", SystemParams("decentralized", 2, 2, 4, 1, seed=3), (1, 2)),
    ]
    for name, params, d in cases:
        inst = build_instance(params, d)
        row = [mutual_information(inst)]
        for tamper in (with_key_reuse, with_key_removed, without_keys):
            try:
                row.append(mutual_information(tamper(inst)))
            except ParameterError:  # no two pads of equal length
                row.append(float("nan"))
        print(f"{name:26s} keyed {row[0]:.3f}  reused {row[1]:.3f}  one pad dropped {row[2]:.3f}  no pads {row[3]:.3f}")


if __name__ == "__main__":
    print("mutual information I(X; W) in bits")
    leak_table()

    print("\nJSON report for the two-user system:")
    print(leakage_report(SystemParams("centralized", 2, 2, 2, 1), (1, 2)).to_json())

    params = SystemParams.from_memory("decentralized", 4, 4, 100_000, 2.5, seed=9)
    rng = make_rng(params.seed)
    lib = FileLibrary.random(4, params.F, rng)
    pl = place_decentralized(lib, params, rng)
    payload = serve_decentralized(pl, lib, (1, 2, 3, 4), rng)
    audit = structural_otp_audit(payload, pl.key_registry)
    print(f"\naudit of a {payload.total_bits}-bit payload ({len(payload)} records): passed={audit.passed}")
    print(audit.flags())
