"""Command line front end.  Every subcommand prints one JSON report.

Exit status: 0 when nothing was violated, 1 when violations were found,
2 on bad usage or invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import modulus as om
from .constructor import (
    BoxFamily,
    bounding_growth,
    build_sard_witness,
    sard_schedule,
    schedule,
)
from .geometry import grid as gg
from .geometry.properties import assemble_property_family, check_k_conditions, check_properties, k_law
from .index_tree import CantorModel, SardModel
from .verifier import verify_embedding, verify_modulus

SCHEMA = "expand-embed/1"


def canon(x):
    """JSON-ready copy: floats to 12 significant digits, rationals as p/q."""
    if x is None or isinstance(x, (bool, str, int)):
        return x
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): canon(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [canon(v) for v in x]
    if hasattr(x, "to_dict"):
        return canon(x.to_dict())
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj) -> str:
    return json.dumps(canon(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _spec(args) -> om.ModulusSpec:
    if args.table:
        return om.ModulusSpec.from_csv(args.table, dim=args.d)
    if args.family == "power":
        return om.ModulusSpec.power(args.p, dim=args.d)
    if args.family == "powerlog":
        return om.ModulusSpec.powerlog(args.p, args.a, dim=args.d)
    raise ValueError("--family table needs --table PATH")


def _config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    if getattr(args, "cantor", None) is None and "family" in cfg:
        cfg["modulus"] = _spec(args).to_dict()
    return cfg


def _cantor_setup(args, N: int):
    model = CantorModel.geometric(args.cantor, N)
    return model, BoxFamily.from_schedule(schedule(list(model.r), args.d, N))


def _sard_setup(args, N: int):
    spec = _spec(args)
    return SardModel(spec), BoxFamily.from_schedule(sard_schedule(spec, N))


# -- subcommands ------------------------------------------------------------


def cmd_classify(args):
    res = om.classify(_spec(args), N=args.N)
    return res.to_dict(), 0


def cmd_admissibility(args):
    rep = om.check_admissibility(_spec(args), grid_size=args.grid, r_min=args.r_min, r_max=args.r_max)
    return rep.to_dict(), 0


def cmd_construct(args):
    if args.cantor:
        _, fam = _cantor_setup(args, args.depth)
        out = {"family": fam.to_dict()}
    else:
        spec = _spec(args)
        sched = sard_schedule(spec, args.depth)
        fam = BoxFamily.from_schedule(sched)
        wit = build_sard_witness(sched)
        out = {"family": fam.to_dict(), "witness": wit.to_dict()}
        if args.witness_csv:
            Path(args.witness_csv).write_text(wit.to_csv())
    return out, 0


def cmd_verify_embedding(args):
    model, fam = _cantor_setup(args, args.depth) if args.cantor else _sard_setup(args, args.depth)
    if args.mutate is not None:
        fam = BoxFamily.from_schedule(
            fam.schedule.with_gap(args.mutate, fam.schedule.gap_for_bit(args.mutate) * Fraction(args.factor))
        )
    rep = verify_embedding(fam, model, args.depth, args.mode)
    return rep.to_dict(), 0 if rep.ok else 1


def cmd_sard_verify(args):
    spec = _spec(args)
    wit = build_sard_witness(sard_schedule(spec, args.depth))
    rep = verify_modulus(wit, spec, args.mode)
    return rep.to_dict(), 0 if rep.ok else 1


def cmd_growth(args):
    spec = _spec(args)
    ell = bounding_growth(spec, args.d, args.K)
    return {
        "verdict": om.analytic_verdict(spec),
        "ell0": [float(x) for x in ell],
        "ell0_exact_last": ell[-1],
    }, 0


def _shape(args, frame_margin: float):
    h = args.h
    if args.shape == "square":
        frame = gg.Frame.around((0, 0), (1, 1), h, margin=frame_margin)
        return [gg.GridSet.from_boxes(frame, [((0, 0), (1, 1))])]
    if args.shape == "disk":
        frame = gg.Frame.around((-1, -1), (1, 1), h, margin=frame_margin)
        return [gg.GridSet.ball(frame, (0, 0), 1.0)]
    rng = np.random.default_rng(args.seed)
    frame = gg.Frame.around((0, 0), (1, 1), h, margin=frame_margin)
    return [gg.random_box_union(rng, frame, int(rng.integers(1, 6)))[0] for _ in range(args.n_sets)]


def cmd_perimeter(args):
    r = args.r if args.r is not None else 10 * args.h
    sets = _shape(args, frame_margin=max(r, 12 * args.h) + 4 * args.h)
    rows, bad = [], 0
    for i, S in enumerate(sets):
        est = gg.p_estimate(S)
        row = {"index": i, "measure": S.measure, **est.to_dict()}
        if args.shape == "square":
            row["p0_05_05"] = gg.p0_estimate(S, 0.05, 0.05)
        if args.shape == "random":
            chk = gg.check_peri(S, sets[(i + 1) % len(sets)], r, tol=args.tol)
            row["checks"] = chk.to_dict()
            row["isop_ok"] = 0.9 * est.iso_lower <= est.p_hat
            bad += not (chk.rr_ok and chk.subadd_ok and chk.diff_ok and chk.key_ok and row["isop_ok"])
        rows.append(row)
    return {"sets": rows, "failures": bad}, 0 if bad == 0 else 1


def _parse_k_law(text: str) -> float:
    # accepts "4" or "4^(m-n)"
    return float(text.split("^")[0])


def cmd_properties(args):
    n_max, m_max = args.n_max, args.m_max
    base = _parse_k_law(args.k_law)
    if args.cantor:
        model, fam = _cantor_setup(args, m_max)
    else:
        model, fam = _sard_setup(args, m_max + 2)
    c = Fraction(args.c) if args.cantor else float(Fraction(args.c))
    reports = []
    for n in range(max(1, args.n_min), n_max + 1):
        for m in range(n, m_max + 1):
            pf = assemble_property_family(fam, model, c, n, m, round(base ** (m - n)), args.q, h=args.h)
            reports.append(check_properties(pf).to_dict())
    k = check_k_conditions(k_law(base), args.d, args.C, n_max=args.k_range)
    bad = any(
        r["p1_max_count"] or r["p4_max_count"] or not r["p3_ok"] or r["p6_ok"] is False or r["p7_ok"] is False
        for r in reports
    )
    return {"properties": reports, "k_conditions": k.to_dict()}, 1 if bad else 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    mod = argparse.ArgumentParser(add_help=False)
    mod.add_argument("--family", choices=["power", "powerlog", "table"], default="power")
    mod.add_argument("--table", help="CSV with header r,omega")
    mod.add_argument("--p", type=float, default=2.0)
    mod.add_argument("--a", type=float, default=0.0)
    mod.add_argument("--d", type=int, default=2)
    mod.add_argument("--out", help="write the JSON report here as well")

    ap = argparse.ArgumentParser(prog="expand-embed", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[mod])
    p.add_argument("--N", type=int, default=32)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("admissibility", parents=[mod])
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.set_defaults(func=cmd_admissibility)

    p = sub.add_parser("construct", parents=[mod])
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--cantor", type=int, metavar="BASE", help="Cantor model r_n = BASE**-n instead of a modulus")
    p.add_argument("--witness-csv")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify-embedding", parents=[mod])
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--mode", choices=["exhaustive", "structural"], default="structural")
    p.add_argument("--cantor", type=int, metavar="BASE")
    p.add_argument("--mutate", type=int, metavar="BIT", help="scale the gap routed from this bit")
    p.add_argument("--factor", default="1/2")
    p.set_defaults(func=cmd_verify_embedding)

    p = sub.add_parser("sard-verify", parents=[mod])
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--mode", choices=["exhaustive", "structural"], default="exhaustive")
    p.set_defaults(func=cmd_sard_verify)

    p = sub.add_parser("growth", parents=[mod])
    p.add_argument("--K", type=int, default=40)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("perimeter", parents=[mod])
    p.add_argument("--shape", choices=["square", "disk", "random"], default="square")
    p.add_argument("--h", type=float, default=0.005)
    p.add_argument("--r", type=float)
    p.add_argument("--tol", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-sets", type=int, default=10)
    p.set_defaults(func=cmd_perimeter)

    p = sub.add_parser("properties", parents=[mod])
    p.add_argument("--cantor", type=int, metavar="BASE")
    p.add_argument("--c", default="1/8")
    p.add_argument("--k-law", default="2", help="base b of k_{n,m} = b**(m-n)")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--C", type=int, default=1)
    p.add_argument("--h", type=float)
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=2)
    p.add_argument("--m-max", type=int, default=4)
    p.add_argument("--k-range", type=int, default=40)
    p.set_defaults(func=cmd_properties)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        result, code = args.func(args)
        text = dumps({"schema": SCHEMA, "command": args.command, "config": _config(args), "result": result})
    except (ValueError, OSError) as exc:
        print(f"expand-embed {args.command}: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
