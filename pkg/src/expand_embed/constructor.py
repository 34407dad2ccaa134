"""Product-of-Cantor-sets construction of the box family and the Sard witness.

Bit ``j`` (1-based) of a code is routed to axis ``(j - 1) % d`` at that
axis' stage ``(j - 1) // d + 1``.  Each axis carries a Cantor construction
whose stage-k children are separated by exactly the routed gap, and the
box of a code is the product of its per-axis intervals.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from . import modulus as om
from .index_tree import Code, codes, dyadic_interval
from .modulus import ModulusSpec

SNAP_BITS = 128
# widening applied to float gaps before snapping; covers the inversion error
SNAP_WIDEN = Fraction(1, 10**12)


def to_rational(x) -> Fraction:
    """Exact rationals pass through; floats become an upper rational bound.

    Rounding up keeps every separation certificate sound: a larger gap only
    helps both the embedding and the modulus check.
    """
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    q = Fraction(float(x)) * (1 + SNAP_WIDEN)
    scale = 2**SNAP_BITS
    return Fraction(math.ceil(q * scale), scale)


def route(j: int, d: int) -> tuple[int, int]:
    """Bit position j (1-based) -> (axis, stage), stage 1-based."""
    return (j - 1) % d, (j - 1) // d + 1


@dataclass(frozen=True)
class GapSchedule:
    d: int
    N: int
    axis_gaps: tuple[tuple[Fraction, ...], ...]

    def gap_for_bit(self, j: int) -> Fraction:
        axis, stage = route(j, self.d)
        return self.axis_gaps[axis][stage - 1]

    def with_gap(self, j: int, value) -> "GapSchedule":
        """Copy with the gap routed from bit ``j`` replaced (for mutation tests)."""
        axis, stage = route(j, self.d)
        gaps = [list(g) for g in self.axis_gaps]
        gaps[axis][stage - 1] = Fraction(value)
        return GapSchedule(self.d, self.N, tuple(tuple(g) for g in gaps))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "N": self.N,
            "bit_routing": "bit j (1-based) -> axis (j-1) mod d, stage floor((j-1)/d)+1",
            "axis_gaps": [[_q(g) for g in gaps] for gaps in self.axis_gaps],
        }


def schedule(v: Sequence, d: int, N: int) -> GapSchedule:
    if d < 2:
        raise ValueError("d must be at least 2")
    if len(v) < N:
        raise ValueError(f"need {N} gaps, got {len(v)}")
    v = list(v[:N])
    if any(x <= 0 for x in v):
        raise ValueError("gaps must be positive")
    if any(b > a for a, b in zip(v, v[1:])):
        raise ValueError("gap sequence must be nonincreasing")
    gaps: list[list[Fraction]] = [[] for _ in range(d)]
    for j, x in enumerate(v, start=1):
        gaps[route(j, d)[0]].append(to_rational(x))
    return GapSchedule(d, N, tuple(tuple(g) for g in gaps))


class CantorAxis:
    """Finite Cantor construction on one axis.

    ``lengths[k]`` is the length of a stage-k interval; the last stage has
    length zero, so full-depth intervals are points.
    """

    def __init__(self, gaps: Sequence):
        self.gaps = tuple(Fraction(g) for g in gaps)
        if any(g <= 0 for g in self.gaps):
            raise ValueError("gaps must be positive")
        K = len(self.gaps)
        lengths = [Fraction(0)] * (K + 1)
        for k in range(K - 1, -1, -1):
            lengths[k] = 2 * lengths[k + 1] + self.gaps[k]
        self.lengths = tuple(lengths)

    @property
    def depth(self) -> int:
        return len(self.gaps)

    def interval(self, bits: str) -> tuple[Fraction, Fraction]:
        left = Fraction(0)
        for i, b in enumerate(bits, start=1):
            if b == "1":
                left += self.lengths[i] + self.gaps[i - 1]
        return left, left + self.lengths[len(bits)]

    def points(self) -> list[Fraction]:
        return [self.interval(format(i, f"0{self.depth}b") if self.depth else "")[0] for i in range(2**self.depth)]


def build_axis(gaps: Sequence) -> CantorAxis:
    return CantorAxis(gaps)


@dataclass(frozen=True)
class Box:
    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, other: "Box") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def axis_separation(self, other: "Box", axis: int) -> Fraction:
        return max(Fraction(0), other.lo[axis] - self.hi[axis], self.lo[axis] - other.hi[axis])

    def sq_dist(self, other: "Box") -> Fraction:
        return sum((self.axis_separation(other, i) ** 2 for i in range(self.dim)), Fraction(0))

    def intersects(self, other: "Box") -> bool:
        return all(a <= d and c <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def to_dict(self) -> dict:
        return {"lo": [_q(x) for x in self.lo], "hi": [_q(x) for x in self.hi]}


class BoxFamily:
    """Boxes R_I for every code of depth <= N.

    Built either from a GapSchedule (boxes computed on demand, any depth up to
    the cap) or from an explicit ``{code: Box}`` map.
    """

    def __init__(self, d: int, N: int, schedule: GapSchedule | None = None, boxes: dict | None = None):
        if schedule is None and boxes is None:
            raise ValueError("need a schedule or explicit boxes")
        self.d = d
        self.N = N
        self.schedule = schedule
        self._boxes = None if boxes is None else {str(k) if isinstance(k, Code) else k: v for k, v in boxes.items()}
        if schedule is not None:
            self.axes = tuple(CantorAxis(g) for g in schedule.axis_gaps)
            self._rect = lru_cache(maxsize=1 << 16)(self._rect_from_schedule)

    @classmethod
    def from_schedule(cls, sched: GapSchedule) -> "BoxFamily":
        return cls(sched.d, sched.N, schedule=sched)

    def _rect_from_schedule(self, bits: str) -> Box:
        lo, hi = [], []
        for m, axis in enumerate(self.axes):
            a, b = axis.interval(bits[m :: self.d])
            lo.append(a)
            hi.append(b)
        return Box(tuple(lo), tuple(hi))

    def rect(self, I: Code | str) -> Box:
        bits = I.bits if isinstance(I, Code) else I
        if len(bits) > self.N:
            raise ValueError(f"code depth {len(bits)} exceeds family depth {self.N}")
        if self._boxes is not None:
            try:
                return self._boxes[bits]
            except KeyError:
                raise KeyError(f"family has no box for code {bits or 'ε'}") from None
        return self._rect(bits)

    def check_complete(self, depth: int):
        if self._boxes is None:
            return
        missing = [c for n in range(depth + 1) for c in codes(n) if c.bits not in self._boxes]
        if missing:
            raise ValueError(f"family is missing {len(missing)} codes, e.g. {missing[0]}")

    def sibling_separation(self, k: int) -> Fraction:
        """Minimum Euclidean distance between R_{P0} and R_{P1} over |P| = k - 1."""
        if self.schedule is not None:
            return self.schedule.gap_for_bit(k)
        best = None
        for P in codes(k - 1):
            s2 = self.rect(P.child(0)).sq_dist(self.rect(P.child(1)))
            best = s2 if best is None else min(best, s2)
        return _sqrt_floor(best)

    def to_dict(self, depth: int | None = None) -> dict:
        depth = self.N if depth is None else depth
        out = {"d": self.d, "N": self.N, "boxes": {}}
        if self.schedule is not None:
            out["schedule"] = self.schedule.to_dict()
        for n in range(depth + 1):
            for c in codes(n):
                out["boxes"][c.bits] = self.rect(c).to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BoxFamily":
        boxes = {
            k: Box(tuple(Fraction(x) for x in v["lo"]), tuple(Fraction(x) for x in v["hi"]))
            for k, v in data["boxes"].items()
        }
        return cls(data["d"], data["N"], boxes=boxes)


def rect(sched: GapSchedule, I: Code) -> Box:
    return BoxFamily.from_schedule(sched).rect(I)


@dataclass
class SardWitness:
    dim: int
    N: int
    codes: list[str]
    points: list[tuple[Fraction, ...]]
    values: list[Fraction]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "N": self.N,
            "pairs": [
                {"code": c, "point": [_q(x) for x in p], "value": _q(v)}
                for c, p, v in zip(self.codes, self.points, self.values)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SardWitness":
        rows = data["pairs"]
        return cls(
            dim=data["dim"],
            N=data["N"],
            codes=[r["code"] for r in rows],
            points=[tuple(Fraction(x) for x in r["point"]) for r in rows],
            values=[Fraction(r["value"]) for r in rows],
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["code"] + [f"x{i}" for i in range(self.dim)] + ["value"])
        for c, p, v in zip(self.codes, self.points, self.values):
            w.writerow([c] + [_q(x) for x in p] + [_q(v)])
        return buf.getvalue()


def build_sard_witness(sched: GapSchedule, N: int | None = None) -> SardWitness:
    """Minimal corner of R_I paired with the left end of I, for every depth-N code."""
    N = sched.N if N is None else N
    if N > sched.N:
        raise ValueError("schedule too shallow")
    fam = BoxFamily.from_schedule(sched)
    cs, pts, vals = [], [], []
    for c in codes(N):
        cs.append(c.bits)
        pts.append(fam.rect(c).lo)
        vals.append(dyadic_interval(c)[0])
    return SardWitness(sched.d, N, cs, pts, vals)


def sard_schedule(spec: ModulusSpec, N: int) -> GapSchedule:
    """Schedule with v = r_star of ``spec`` in dimension ``spec.dim``."""
    seq = om.critical_sequence(spec, N)
    return schedule(seq.r_star, spec.dim, N)


def bounding_growth(spec: ModulusSpec, d: int, K: int) -> list[Fraction]:
    """Root length of the residue-0 axis Cantor set truncated at stage k, k = 0..K.

    The axis takes gaps v_d, v_2d, ..., v_Kd with v = r_star; the stage-k
    value equals sum_{i<=k} 2**(i-1) v_{id}.  Float r_star values enter as
    their exact binary rationals (no widening).
    """
    if K == 0:
        return [Fraction(0)]
    seq = om.critical_sequence(spec, d * K)
    gaps = [Fraction(seq.r_star[d * k - 1]) for k in range(1, K + 1)]
    return [Fraction(0)] + [CantorAxis(gaps[:k]).lengths[0] for k in range(1, K + 1)]


def _q(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _sqrt_floor(q: Fraction) -> Fraction:
    """A rational lower bound for sqrt(q), exact when q is a rational square."""
    n, d = q.numerator, q.denominator
    sn, sd = math.isqrt(n), math.isqrt(d)
    if sn * sn == n and sd * sd == d:
        return Fraction(sn, sd)
    scale = 2**SNAP_BITS
    return Fraction(math.isqrt(n * scale * scale // d), scale)
