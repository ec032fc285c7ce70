"""Sublevel-set operator norms against mu, with the monomial bound alongside.

    python scripts/sublevel_growth.py "x*y" --conditions 1,1 --n 512
"""
import argparse

from oscint.poly import parse_poly
from oscint.sublevel import AlgebraicDomain, sublevel_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("H")
    ap.add_argument("--conditions", default="1,1", help="derivative orders, ';'-separated, e.g. '1,1;0,2'")
    ap.add_argument("--domain", default=None, help="';'-separated inequalities; default the unit square")
    ap.add_argument("--kmin", type=int, default=4)
    ap.add_argument("--kmax", type=int, default=12)
    ap.add_argument("--n", type=int, default=1024)
    args = ap.parse_args()
    conds = [tuple(int(v) for v in c.split(",")) for c in args.conditions.split(";")]
    domain = AlgebraicDomain.whole() if args.domain is None else AlgebraicDomain.parse(args.domain.replace(";", "\n"))
    mus = [2.0**-k for k in range(args.kmax, args.kmin - 1, -1)]
    sw = sublevel_sweep(parse_poly(args.H), domain, mus, conds, n=args.n)
    bounds = sw.bounds or [float("nan")] * len(mus)
    for mu, v, b in zip(sw.mus, sw.norms, bounds):
        print(f"mu {mu:.3e}  norm {v:.5f}  bound {b:.5f}  norm/mu^theory {v / mu ** float(sw.theory_exponent):.4f}")
    print(f"fitted exponent {sw.fitted_exponent:.4f}, theory {sw.theory_exponent} (d = {sw.d})")


if __name__ == "__main__":
    main()
