"""Secure vs. non-secure memory-rate curves and the gap to the lower bound.

Prints a table for one ``(N, K)`` and writes the full CSV next to it.
Pass ``--plot`` to draw the curves if matplotlib is around.

    python3 demos/tradeoff_table.py --n 20 --k 20 --csv curves.csv
"""

import argparse

from securecache.analysis import (
    certify_gap_centralized,
    certify_gap_decentralized,
    max_decentralization_cost,
    max_security_cost,
    tradeoff_curve,
    write_csv,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--csv")
    ap.add_argument("--plot", action="store_true")
    ap.add_argument("--sweep", type=int, default=60, help="largest N and K in the gap sweep")
    args = ap.parse_args()

    rows = tradeoff_curve(args.n, args.k)
    cen = [r for r in rows if r.scheme == "centralized"]
    dec = {r.M: r for r in rows if r.scheme == "decentralized"}
    print(f"{'M':>8} {'secure':>9} {'random':>9} {'insecure':>9} {'lower':>9}")
    for r in cen:
        print(f"{r.M:8.3f} {r.R_secure:9.4f} {dec[r.M].R_secure:9.4f} {r.R_baseline:9.4f} {r.R_lower:9.4f}")

    # The extra rate paid for secrecy is largest at M = 1 and shrinks quickly.
    print(f"\nlargest secure - insecure gap: {max_security_cost(args.n, args.k):.3f}")
    print(f"largest random - centralized gap: {max_decentralization_cost(args.n, args.k):.3f}")

    c = certify_gap_centralized(args.sweep, args.sweep)
    d = certify_gap_decentralized(args.sweep, args.sweep)
    print(f"\ngap to lower bound over N, K <= {args.sweep}:")
    print(f"  centralized   max {c.max_ratio:.3f}  (K < N: {c.max_ratio_k_lt_n:.3f}, K > N: {c.max_ratio_k_gt_n:.3f})")
    print(f"  decentralized max {d.max_ratio:.3f}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_csv(rows, fh)
        print(f"\nwrote {args.csv}")

    if args.plot:
        import matplotlib.pyplot as plt

        M = [r.M for r in cen]
        plt.plot(M, [r.R_secure for r in cen], label="secure, centralized")
        plt.plot(M, [dec[m].R_secure for m in M], label="secure, decentralized")
        plt.plot(M, [r.R_baseline for r in cen], "--", label="no secrecy")
        plt.plot(M, [r.R_lower for r in cen], ":", label="lower bound")
        plt.xlabel("M (files)")
        plt.ylabel("R (files)")
        plt.legend()
        plt.show()


if __name__ == "__main__":
    main()
