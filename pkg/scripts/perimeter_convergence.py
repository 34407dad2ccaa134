"""Grid refinement study for the perimeter estimators on a square, a disk and a random box union."""

import argparse
import math

import numpy as np

from expand_embed.geometry.grid import Frame, GridSet, p0_estimate, p_estimate, random_box_union


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hs", type=float, nargs="+", default=[0.02, 0.01, 0.005, 0.0025])
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    print(f"{'h':>8} {'sq p0 err':>10} {'sq p_hat':>9} {'disk p0 err':>12} {'disk p_hat':>11} {'rand p_hat/iso':>15}")
    for h in args.hs:
        sq = GridSet.from_boxes(Frame.around((0, 0), (1, 1), h, margin=0.3), [((0, 0), (1, 1))])
        disk = GridSet.ball(Frame.around((-1, -1), (1, 1), h, margin=0.3), (0, 0), 1.0)
        rng = np.random.default_rng(args.seed)
        rand, _ = random_box_union(rng, Frame.around((0, 0), (1, 1), h, margin=0.3), 4)
        e_sq = p0_estimate(sq, 0.05, 0.05) / 4.4712 - 1
        e_disk = p0_estimate(disk, 0.05, 0.05) / (2 * math.pi + 0.15 * math.pi) - 1
        est = p_estimate(rand)
        print(
            f"{h:8.4f} {e_sq:10.4%} {p_estimate(sq).p_hat:9.4f} {e_disk:12.4%} "
            f"{p_estimate(disk).p_hat:11.4f} {est.p_hat / est.iso_lower:15.4f}"
        )


if __name__ == "__main__":
    main()
