"""Measured (P1)-(P7) constants for the Cantor and Sard recipes over a range of scales."""

import argparse
import json
from fractions import Fraction

from expand_embed.constructor import BoxFamily, sard_schedule, schedule
from expand_embed.geometry.properties import assemble_property_family, check_properties
from expand_embed.index_tree import CantorModel, SardModel
from expand_embed.modulus import ModulusSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--recipe", choices=["cantor", "sard"], default="cantor")
    ap.add_argument("--base", type=int, default=4, help="Cantor r_n = base^-n")
    ap.add_argument("--p", type=float, default=1.5, help="Sard omega(r) = r^p")
    ap.add_argument("--k-base", type=int, default=None)
    ap.add_argument("--n-max", type=int, default=3)
    ap.add_argument("--m-max", type=int, default=5)
    ap.add_argument("--q", type=int, default=1)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    rows = []
    if args.recipe == "cantor":
        model = CantorModel.geometric(args.base, args.m_max)
        fam = BoxFamily.from_schedule(schedule(list(model.r), 2, args.m_max))
        c, kb = Fraction(1, 8), args.k_base or args.base
    else:
        spec = ModulusSpec.power(args.p, 2)
        model, fam = SardModel(spec), BoxFamily.from_schedule(sard_schedule(spec, args.m_max + 2))
        c, kb = 1 / 8, args.k_base or 2
    for n in range(1, args.n_max + 1):
        for m in range(n, args.m_max + 1):
            rep = check_properties(assemble_property_family(fam, model, c, n, m, kb ** (m - n), args.q))
            rows.append(rep.to_dict())
            if not args.json:
                print(
                    f"n={n} m={m} k={rep.k:4d}  P1={rep.p1_max_count} P2={rep.p2_min_ratio:.3f} P3={rep.p3_ok} "
                    f"P4={rep.p4_max_count} P5={rep.p5_normalized} P6={rep.p6_ok} P7={rep.p7_ok} "
                    f"grid={rep.decisions.grid}"
                )
    if args.json:
        print(json.dumps(rows, indent=2, default=str))


if __name__ == "__main__":
    main()
