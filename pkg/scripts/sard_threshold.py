"""Sweep the exponent p of omega(r) = r^p around p = d and print verdict, series evidence and footprint growth."""

import argparse

import numpy as np

from expand_embed import modulus as om
from expand_embed.constructor import BoxFamily, bounding_growth, sard_schedule
from expand_embed.index_tree import SardModel
from expand_embed.verifier import verify_embedding


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--K", type=int, default=120)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()

    print(f"{'p':>6} {'verdict':>11} {'S_32':>10} {'ratio':>8} {'l0(K)':>10} {'l0(K)/l0(K/4)':>14} {'viol':>5}")
    for p in np.linspace(args.d - 0.6, args.d + 0.4, args.points):
        spec = om.ModulusSpec.power(float(p), args.d)
        cls = om.classify(spec)
        ell = bounding_growth(spec, args.d, args.K)
        fam = BoxFamily.from_schedule(sard_schedule(spec, args.depth))
        rep = verify_embedding(fam, SardModel(spec), args.depth, "structural")
        print(
            f"{p:6.2f} {cls.verdict:>11} {cls.partial_sums[-1]:10.4f} {cls.term_ratio_estimate:8.4f} "
            f"{float(ell[-1]):10.4f} {float(ell[-1]) / float(ell[args.K // 4]):14.3f} {len(rep.violations):5d}"
        )


if __name__ == "__main__":
    main()
