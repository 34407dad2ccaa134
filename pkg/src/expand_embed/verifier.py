"""Brute-force and structural verification of constructed families.

Pairs of depth-N codes are sharded by the position ``k`` of their first
differing bit.  Exhaustive mode screens each shard in floating point and
settles every pair within a relative band of its threshold exactly (rational
squared distances; high-precision omega for the modulus check).  Structural
mode certifies a whole shard at once from the sibling gap at level ``k`` and
re-checks pair by pair only the shards whose certificate fails, so both modes
report the same violations.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import modulus as om
from .constructor import BoxFamily, SardWitness, sard_schedule
from .index_tree import CantorModel, Code, DistanceModel, SardModel, codes

EXHAUSTIVE_MAX_DEPTH = 12
STRUCTURAL_MAX_DEPTH = 63
SCREEN_RTOL = 1e-9
# stands in for "negative" when a violation is decided exactly at zero slack
TINY = 5e-324


@dataclass(frozen=True, order=True)
class Violation:
    code_a: str
    code_b: str
    required: float
    actual: float
    kind: str = "distance"  # distance | disjoint | nesting | modulus

    def to_dict(self) -> dict:
        return {
            "code_a": self.code_a or "ε",
            "code_b": self.code_b or "ε",
            "required": self.required,
            "actual": self.actual,
            "kind": self.kind,
        }


@dataclass
class VerificationReport:
    mode: str
    depth: int
    checked_pairs: int = 0
    violations: list[Violation] = field(default_factory=list)
    min_slack: float = math.inf
    level_min_slack: dict[int, float] = field(default_factory=dict)
    certified_levels: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def violation_set(self) -> set[tuple[str, str, str]]:
        return {(v.code_a, v.code_b, v.kind) for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "depth": self.depth,
            "checked_pairs": self.checked_pairs,
            "violations": [v.to_dict() for v in self.violations],
            "min_slack": self.min_slack,
            "level_min_slack": {str(k): v for k, v in sorted(self.level_min_slack.items())},
            "certified_levels": self.certified_levels,
        }


@dataclass
class _Shard:
    k: int
    pairs: int = 0
    min_slack: float = math.inf
    violations: list = field(default_factory=list)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EXPAND_EMBED_THREADS", "1")))
    except ValueError:
        return 1


def _run_shards(fn, levels):
    levels = list(levels)
    n = min(_threads(), max(1, len(levels)))
    if n == 1:
        return [fn(k) for k in levels]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, levels))


def _level_pairs(N: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (i, j), i < j, of depth-N codes first differing at bit k."""
    s = 1 << (N - k)
    base = (np.arange(1 << (k - 1)) * 2 * s)[:, None, None]
    a = base + np.arange(s)[None, :, None]
    b = base + s + np.arange(s)[None, None, :]
    a, b = np.broadcast_arrays(a, b)
    return a.ravel(), b.ravel()


def _merge(report: VerificationReport, shards: list[_Shard]):
    for sh in shards:
        report.checked_pairs += sh.pairs
        report.violations.extend(sh.violations)
        report.level_min_slack[sh.k] = sh.min_slack
        report.min_slack = min(report.min_slack, sh.min_slack)
    report.violations.sort()
    if report.violations and report.min_slack >= 0:
        report.min_slack = -TINY


# --- embedding -----------------------------------------------------------


class _LeafGeometry:
    def __init__(self, family: BoxFamily, N: int):
        self.N = N
        self.codes = [c.bits for c in codes(N)]
        self.boxes = [family.rect(c) for c in self.codes]
        self.lo = np.array([[float(x) for x in b.lo] for b in self.boxes])
        self.hi = np.array([[float(x) for x in b.hi] for b in self.boxes])

    def sq_dist(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        sep = np.maximum(0.0, np.maximum(self.lo[j] - self.hi[i], self.lo[i] - self.hi[j]))
        return np.sum(sep * sep, axis=1)


def _required_table(model: DistanceModel, N: int):
    """None: constant per level (Cantor); array: rho indexed by the gap between
    depth-N intervals in units of 2**-N (Sard); False: ask the model per pair."""
    if isinstance(model, CantorModel):
        return None
    if isinstance(model, SardModel):
        gaps = np.arange(1 << N, dtype=float) / float(1 << N)  # gap index t -> t / 2^N
        return om.invert_many(model.spec, gaps)
    return False


def _embedding_shard(geom: _LeafGeometry, model: DistanceModel, table, k: int) -> _Shard:
    N = geom.N
    i, j = _level_pairs(N, k)
    sh = _Shard(k, pairs=len(i))
    if table is None:
        req_exact = model.rho(Code(geom.codes[i[0]]), Code(geom.codes[j[0]]))
        req = np.full(len(i), float(req_exact))
    elif table is False:
        req = np.array([float(model.rho(Code(geom.codes[a]), Code(geom.codes[b]))) for a, b in zip(i, j)])
    else:
        req = table[j - i - 1]
    sq = geom.sq_dist(i, j)
    req2 = req * req
    band = SCREEN_RTOL * np.maximum(req2, sq) + 1e-300
    bad = sq < req2 - band
    unsure = np.abs(sq - req2) <= band
    # also settle touching boxes exactly (disjointness)
    unsure |= sq <= band
    slack = np.sqrt(sq) - req
    for idx in np.nonzero(bad | unsure)[0]:
        a, b = int(i[idx]), int(j[idx])
        ba, bb = geom.boxes[a], geom.boxes[b]
        exact_sq = ba.sq_dist(bb)
        r = Fraction(req_exact) if table is None else Fraction(float(req[idx]))
        if exact_sq < r * r:
            sh.violations.append(Violation(geom.codes[a], geom.codes[b], float(r), math.sqrt(exact_sq)))
            slack[idx] = min(slack[idx], -TINY)
        elif ba.intersects(bb):
            sh.violations.append(Violation(geom.codes[a], geom.codes[b], 0.0, 0.0, kind="disjoint"))
            slack[idx] = min(slack[idx], -TINY)
        else:
            slack[idx] = max(slack[idx], 0.0)
    sh.min_slack = float(np.min(slack)) if len(slack) else math.inf
    return sh


def _nesting_violations(family: BoxFamily, N: int) -> list[Violation]:
    out = []
    for n in range(1, N + 1):
        for c in codes(n):
            if not family.rect(c.parent).contains(family.rect(c)):
                out.append(Violation(c.parent.bits, c.bits, 0.0, 0.0, kind="nesting"))
    return out


def verify_embedding(
    family: BoxFamily, model: DistanceModel, N: int, mode: str = "exhaustive"
) -> VerificationReport:
    """Check nesting, disjointness and dist(R_I, R_J) >= rho(I, J) at depth N."""
    mode = mode.lower()
    if N > family.N:
        raise ValueError(f"family defined only to depth {family.N}")
    report = VerificationReport(mode=mode, depth=N)
    if N == 0:
        report.min_slack = 0.0
        return report
    if mode == "exhaustive":
        if N > EXHAUSTIVE_MAX_DEPTH:
            raise ValueError(f"exhaustive mode is capped at depth {EXHAUSTIVE_MAX_DEPTH}")
        family.check_complete(N)
        report.violations.extend(_nesting_violations(family, N))
        geom = _LeafGeometry(family, N)
        table = _required_table(model, N)
        _merge(report, _run_shards(lambda k: _embedding_shard(geom, model, table, k), range(1, N + 1)))
        return report
    if mode != "structural":
        raise ValueError(f"unknown mode {mode!r}")
    if N > STRUCTURAL_MAX_DEPTH:
        raise ValueError(f"structural mode is capped at depth {STRUCTURAL_MAX_DEPTH}")
    if family.schedule is None:
        family.check_complete(N)
        report.violations.extend(_nesting_violations(family, N))
    # schedule-built families nest by construction: every axis gap is > 0
    failing = []
    for k in range(1, N + 1):
        cert = family.sibling_separation(k)
        req = model.level_sup(k, N)
        req_q = Fraction(req) if not isinstance(req, Fraction) else req
        if cert >= req_q:
            report.certified_levels.append(k)
            report.level_min_slack[k] = float(cert - req_q)
            report.min_slack = min(report.min_slack, report.level_min_slack[k])
        else:
            failing.append(k)
    if failing:
        if N > EXHAUSTIVE_MAX_DEPTH:
            raise ValueError(f"levels {failing} not certified and too deep to enumerate")
        geom = _LeafGeometry(family, N)
        table = _required_table(model, N)
        _merge(report, _run_shards(lambda k: _embedding_shard(geom, model, table, k), failing))
    report.violations.sort()
    if report.violations and report.min_slack >= 0:
        report.min_slack = -TINY
    return report


# --- modulus ---------------------------------------------------------------


def _omega_mp(spec: om.ModulusSpec, sq: Fraction) -> mpmath.mpf:
    with mpmath.workdps(50):
        r = mpmath.sqrt(mpmath.mpf(sq.numerator) / sq.denominator)
        if r == 0:
            return mpmath.mpf(0)
        if spec.family == "power":
            return r ** spec.p
        if spec.family == "powerlog":
            return r ** spec.p * (1 - mpmath.log(r)) ** spec.a
        return mpmath.mpf(om.eval(spec, float(r)))


def _witness_order(witness: SardWitness) -> list[int]:
    pos = {c: i for i, c in enumerate(witness.codes)}
    try:
        return [pos[c.bits] for c in codes(witness.N)]
    except KeyError as e:
        raise ValueError(f"witness lacks code {e.args[0]}") from None


def _modulus_shard(spec, pts, pts_exact, vals, vals_f, names, N, k) -> _Shard:
    i, j = _level_pairs(N, k)
    sh = _Shard(k, pairs=len(i))
    diff = pts[i] - pts[j]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    w = om.eval_many(spec, dist)
    df = np.abs(vals_f[i] - vals_f[j])
    slack = w - df
    unsure = np.abs(slack) <= SCREEN_RTOL * np.maximum(df, w) + 1e-300
    for idx in np.nonzero((slack < 0) | unsure)[0]:
        a, b = int(i[idx]), int(j[idx])
        sq = sum(((x - y) ** 2 for x, y in zip(pts_exact[a], pts_exact[b])), Fraction(0))
        dq = abs(vals[a] - vals[b])
        wq = _omega_mp(spec, sq)
        with mpmath.workdps(50):
            s = wq - mpmath.mpf(dq.numerator) / dq.denominator
        if s < 0:
            sh.violations.append(Violation(names[a], names[b], float(dq), float(wq), kind="modulus"))
            slack[idx] = min(float(s), -TINY)
        else:
            slack[idx] = max(float(s), 0.0)
    sh.min_slack = float(np.min(slack)) if len(slack) else math.inf
    return sh


def _bbox_sq_gap(P, Q) -> Fraction:
    """Exact squared distance between the bounding boxes of two point sets."""
    total = Fraction(0)
    for axis in range(len(P[0])):
        a = [p[axis] for p in P]
        b = [q[axis] for q in Q]
        g = max(Fraction(0), min(b) - max(a), min(a) - max(b))
        total += g * g
    return total


def verify_modulus(
    witness: SardWitness, spec: om.ModulusSpec, mode: str = "exhaustive"
) -> VerificationReport:
    """Check |f(a) - f(b)| <= omega(|a - b|) over the witness pairs.

    ``violations`` carry required = |f(a) - f(b)| and actual = omega(|a - b|).
    """
    mode = mode.lower()
    if witness.dim != spec.dim:
        raise ValueError(f"witness dimension {witness.dim} != modulus dimension {spec.dim}")
    N = witness.N
    report = VerificationReport(mode=mode, depth=N)
    if N == 0:
        report.min_slack = 0.0
        return report
    order = _witness_order(witness)
    pts_exact = [witness.points[o] for o in order]
    vals = [witness.values[o] for o in order]
    names = [witness.codes[o] for o in order]
    pts = np.array([[float(x) for x in p] for p in pts_exact])
    vals_f = np.array([float(v) for v in vals])

    def exhaustive(levels):
        fn = lambda k: _modulus_shard(spec, pts, pts_exact, vals, vals_f, names, N, k)  # noqa: E731
        _merge(report, _run_shards(fn, levels))

    if mode == "exhaustive":
        if N > EXHAUSTIVE_MAX_DEPTH:
            raise ValueError(f"exhaustive mode is capped at depth {EXHAUSTIVE_MAX_DEPTH}")
        exhaustive(range(1, N + 1))
        return report
    if mode != "structural":
        raise ValueError(f"unknown mode {mode!r}")

    # witness points sorted by code, so every subtree is a contiguous block
    failing = []
    for k in range(1, N + 1):
        s = 1 << (N - k)
        worst = Fraction(0)
        sep2 = None
        for start in range(0, 1 << N, 2 * s):
            A, B = vals[start : start + s], vals[start + s : start + 2 * s]
            worst = max(worst, max(B) - min(A), max(A) - min(B))
            gap2 = _bbox_sq_gap(pts_exact[start : start + s], pts_exact[start + s : start + 2 * s])
            sep2 = gap2 if sep2 is None else min(sep2, gap2)
        if sep2 == 0:
            failing.append(k)
            continue
        w = _omega_mp(spec, sep2)
        with mpmath.workdps(50):
            margin = w - mpmath.mpf(worst.numerator) / worst.denominator
        if margin >= 0:
            report.certified_levels.append(k)
            report.level_min_slack[k] = float(margin)
            report.min_slack = min(report.min_slack, float(margin))
        else:
            failing.append(k)
    if failing:
        exhaustive(failing)
    report.violations.sort()
    return report



def cross_check(
    family: BoxFamily,
    model: DistanceModel,
    spec: om.ModulusSpec | None = None,
    N_small: int = 6,
    witness: SardWitness | None = None,
) -> bool:
    """True when exhaustive and structural modes report identical violations."""
    if N_small > 8:
        raise ValueError("cross_check is meant for N_small <= 8")
    N = min(N_small, family.N)
    ex = verify_embedding(family, model, N, "exhaustive")
    st = verify_embedding(family, model, N, "structural")
    same = ex.violation_set() == st.violation_set()
    if spec is not None:
        if witness is None:
            from .constructor import build_sard_witness

            witness = build_sard_witness(sard_schedule(spec, N), N)
        same &= (
            verify_modulus(witness, spec, "exhaustive").violation_set()
            == verify_modulus(witness, spec, "structural").violation_set()
        )
    return same
