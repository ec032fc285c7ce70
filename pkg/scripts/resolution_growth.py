"""Size of the stopped family against the depth cap, and per-point coverage.

Shows why very deep caps are out of reach: squares along the zero curve of H
never stop, so the family roughly doubles with every extra level.

    python scripts/resolution_growth.py "y^2 - x^3" --j -6 --depths 6 7 8 9
"""
import argparse
import time

import numpy as np

from oscint.poly import parse_poly
from oscint.resolution import (ResolutionBudgetError, descend_coverage, initial_cover, sector_for_root,
                               stopping_time_decompose)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("H")
    ap.add_argument("--edge", type=int, default=0)
    ap.add_argument("--root", type=int, default=0)
    ap.add_argument("--j", type=int, default=-6)
    ap.add_argument("--depths", type=int, nargs="+", default=[6, 7, 8, 9])
    ap.add_argument("--coverage-depth", type=int, default=20)
    ap.add_argument("--budget", type=int, default=4_000_000)
    ap.add_argument("--samples", type=int, default=100_000)
    args = ap.parse_args()
    H = parse_poly(args.H)
    region, _, _ = sector_for_root(H, args.edge, args.root, args.j)
    cover = initial_cover(region)
    print(f"initial cover: {len(cover)} squares, mu = {cover.mu}")
    prev = None
    for depth in args.depths:
        t = time.perf_counter()
        try:
            res = stopping_time_decompose(H, cover, depth, args.budget)
        except ResolutionBudgetError as exc:
            print(f"depth {depth:2d}: budget exceeded after {exc.processed} squares at level {exc.depth_reached}")
            break
        stopped, capped = len(res.f_infinity()), int(res.capped.sum())
        growth = "" if prev is None else f"  x{stopped / prev:.2f}"
        print(f"depth {depth:2d}: {stopped} stopped, {capped} capped{growth}  ({time.perf_counter() - t:.1f}s)")
        prev = stopped
    cov = descend_coverage(H, cover, region, args.coverage_depth, args.samples, np.random.default_rng(0))
    print(f"per-point coverage at depth {args.coverage_depth}: {cov.coverage:.5f} "
          f"(capped {cov.capped_fraction:.5f}, missing {cov.missing})")


if __name__ == "__main__":
    main()
