"""Compare decay slopes of one phase on several cutoff domains.

    python scripts/decay_domains.py "x^3*y/6" --n 1024 --iters 60
"""
import argparse
import math
import time
from fractions import Fraction

from oscint.poly import Rect, parse_poly
from oscint.trilinear import decay_sweep

HALF = Fraction(1, 2)
DOMAINS = {
    "unit": Rect(0, 1, 0, 1),
    "centred": Rect(-HALF, HALF, -HALF, HALF),
    "wide": Rect(-1, 1, -1, 1),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("phase")
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--kmin", type=int, default=8)
    ap.add_argument("--kmax", type=int, default=14)
    ap.add_argument("--restarts", type=int, default=8)
    ap.add_argument("--iters", type=int, default=60)
    ap.add_argument("--domains", nargs="+", default=list(DOMAINS), choices=list(DOMAINS))
    args = ap.parse_args()
    S = parse_poly(args.phase)
    lams = [2.0**k for k in range(args.kmin, args.kmax + 1)]
    for name in args.domains:
        t = time.perf_counter()
        sw = decay_sweep(S, "bump", lams, n=args.n, domain=DOMAINS[name], restarts=args.restarts,
                         iters=args.iters, probe_domain=DOMAINS["centred"])
        print(f"{name:8s} norm slope {sw.fitted_slope:+.4f}  extremizer slope {sw.extremizer_slope:+.4f}  "
              f"theory {float(sw.theory_slope):+.4f}  ({time.perf_counter() - t:.0f}s)")
        for lam, v in zip(sw.lambdas, sw.norms):
            print(f"    lambda 2^{math.log2(lam):g}: norm {v:.6f}  scaled {v * lam ** -float(sw.theory_slope):.4f}")


if __name__ == "__main__":
    main()
