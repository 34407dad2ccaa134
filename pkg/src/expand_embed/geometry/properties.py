"""The sets C_I, E_{I,j}, D_{I,j} and the measured property suite.

Every set here is a finite union of open neighbourhoods of boxes,
``union_i B(box_i, r_i)``.  Neighbourhoods compose exactly
(B(B(A, a), b) = B(A, a + b)), so dilation, intersection and a sufficient
containment test are all decided on the box data in rational arithmetic.
Only the questions that test cannot settle, an annulus D = B(E, w) minus E
meeting or fitting inside another set, fall back to rasterising the local
window at the family's cell size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .. import modulus as om
from ..constructor import BoxFamily
from ..index_tree import CantorModel, Code, DistanceModel, SardModel, codes, dyadic_interval, nested
from .grid import Frame, GridSet, ResolutionError

BAND = 1e-9
MAX_WINDOW_CELLS = 40_000_000


def _sep(lo1, hi1, lo2, hi2):
    return np.maximum(0.0, np.maximum(lo2 - hi1, lo1 - hi2))


class BallUnion:
    """union_i B(box_i, r_i) with exact rational data and a float shadow."""

    def __init__(self, lo: Sequence[tuple], hi: Sequence[tuple], r: Sequence):
        keep = [i for i, x in enumerate(r) if x > 0]
        self.lo = [tuple(Fraction(v) for v in lo[i]) for i in keep]
        self.hi = [tuple(Fraction(v) for v in hi[i]) for i in keep]
        self.r = [Fraction(r[i]) for i in keep]
        d = len(lo[0]) if len(lo) else 0
        self._flo = np.array([[float(v) for v in b] for b in self.lo], dtype=float).reshape(len(keep), d)
        self._fhi = np.array([[float(v) for v in b] for b in self.hi], dtype=float).reshape(len(keep), d)
        self._fr = np.array([float(x) for x in self.r])

    def __len__(self):
        return len(self.r)

    def is_empty(self) -> bool:
        return not self.r

    def dilate(self, t) -> "BallUnion":
        t = Fraction(t)
        return BallUnion(self.lo, self.hi, [x + t for x in self.r])

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return (self._flo - self._fr[:, None]).min(axis=0), (self._fhi + self._fr[:, None]).max(axis=0)

    def inscribed_radius(self) -> Fraction:
        """Radius of a ball certainly inside the set."""
        best = Fraction(0)
        for lo, hi, r in zip(self.lo, self.hi, self.r):
            best = max(best, r + min(b - a for a, b in zip(lo, hi)) / 2)
        return best

    def _exact_sq(self, i, other, j) -> Fraction:
        return sum(
            (max(Fraction(0), b0 - a1, a0 - b1) ** 2 for a0, a1, b0, b1 in
             zip(self.lo[i], self.hi[i], other.lo[j], other.hi[j])),
            Fraction(0),
        )

    def _exact_max_sq(self, i, other, j) -> Fraction:
        total = Fraction(0)
        for a0, a1, b0, b1 in zip(self.lo[i], self.hi[i], other.lo[j], other.hi[j]):
            total += max(max(Fraction(0), b0 - x, x - b1) for x in (a0, a1)) ** 2
        return total

    def intersects(self, other: "BallUnion") -> bool:
        if self.is_empty() or other.is_empty():
            return False
        sep = _sep(self._flo[:, None, :], self._fhi[:, None, :], other._flo[None], other._fhi[None])
        sq = np.sum(sep * sep, axis=2)
        rs = (self._fr[:, None] + other._fr[None, :]) ** 2
        if np.any(sq < rs * (1 - BAND)):
            return True
        for i, j in zip(*np.nonzero(np.abs(sq - rs) <= BAND * rs)):
            if self._exact_sq(i, other, j) < (self.r[i] + other.r[j]) ** 2:
                return True
        return False

    def components_within(self, other: "BallUnion") -> np.ndarray:
        """Per component: lies inside a single component of ``other``."""
        if self.is_empty():
            return np.zeros(0, dtype=bool)
        if other.is_empty():
            return np.zeros(len(self), dtype=bool)
        a, b = self._flo[:, None, :], self._fhi[:, None, :]
        c, d = other._flo[None], other._fhi[None]
        far = np.maximum(_sep(a, a, c, d), _sep(b, b, c, d))
        msq = np.sum(far * far, axis=2)
        dr = other._fr[None, :] - self._fr[:, None]
        need = np.where(dr >= 0, dr * dr, -1.0)
        sure = msq <= need * (1 - BAND)
        out = sure.any(axis=1)
        unsure = (np.abs(msq - need) <= BAND * np.abs(need) + 1e-300) & (dr >= 0)
        for i, j in zip(*np.nonzero(unsure & ~out[:, None])):
            if out[i]:
                continue
            gap = other.r[j] - self.r[i]
            if gap >= 0 and self._exact_max_sq(i, other, j) <= gap * gap:
                out[i] = True
        return out

    def within(self, other: "BallUnion") -> bool:
        """Sufficient test for self being a subset of other."""
        return bool(np.all(self.components_within(other)))

    def simplify(self) -> "BallUnion":
        """Drop components that sit inside another component."""
        n = len(self)
        if n < 2:
            return self
        keep = []
        for i in range(n):
            one = BallUnion([self.lo[i]], [self.hi[i]], [self.r[i]])
            rest_idx = [j for j in range(n) if j != i and (j in keep or j > i)]
            rest = BallUnion([self.lo[j] for j in rest_idx], [self.hi[j] for j in rest_idx],
                             [self.r[j] for j in rest_idx])
            if not one.within(rest):
                keep.append(i)
        return BallUnion([self.lo[i] for i in keep], [self.hi[i] for i in keep], [self.r[i] for i in keep])

    def raster(self, frame: Frame) -> GridSet:
        mask = np.zeros(frame.shape, dtype=bool)
        axes = frame.axes()
        for lo, hi, r in zip(self._flo, self._fhi, self._fr):
            sl, parts = [], []
            for ax, a, b in zip(axes, lo, hi):
                i0 = int(np.searchsorted(ax, a - r, side="left"))
                i1 = int(np.searchsorted(ax, b + r, side="right"))
                sl.append(slice(i0, i1))
                parts.append(_sep(ax[i0:i1], ax[i0:i1], a, b))
            if any(s.stop <= s.start for s in sl):
                continue
            grids = np.meshgrid(*parts, indexing="ij", sparse=True)
            sq = sum(g * g for g in grids)
            mask[tuple(sl)] |= sq < r * r
        return GridSet(frame, mask)


def local_frame(sets: Sequence[BallUnion], h: float, clip: Sequence[BallUnion] = ()) -> Frame:
    """Frame covering the bounding boxes of ``sets`` (intersected with ``clip``)."""
    boxes = [s.bbox() for s in sets if not s.is_empty()]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    for s in clip:
        if not s.is_empty():
            a, b = s.bbox()
            lo, hi = np.maximum(lo, a), np.minimum(hi, b)
    hi = np.maximum(hi, lo)
    frame = Frame.around(lo, hi, h, margin=2 * h)
    if frame.cells > MAX_WINDOW_CELLS:
        raise ResolutionError(f"local window needs {frame.cells} cells")
    return frame


@dataclass
class Decisions:
    """How many set-relation questions were settled exactly vs on the grid."""

    exact: int = 0
    grid: int = 0


def annulus_meets(outer: BallUnion, inner: BallUnion, target: BallUnion, h: float, tally: Decisions) -> bool:
    """Does (outer minus inner) meet ``target``?"""
    if not outer.intersects(target) or target.within(inner):
        tally.exact += 1
        return False
    tally.grid += 1
    frame = local_frame([target], h, clip=[outer])
    ann = outer.raster(frame) - inner.raster(frame)
    return not (ann & target.raster(frame)).is_empty()


def annulus_within(outer: BallUnion, inner: BallUnion, target: BallUnion, h: float, tally: Decisions) -> bool:
    """Is (outer minus inner) inside ``target``?"""
    if outer.within(target):
        tally.exact += 1
        return True
    tally.grid += 1
    frame = local_frame([outer], h)
    ann = outer.raster(frame) - inner.raster(frame)
    return ann.issubset(target.raster(frame))


class PropertyFamily:
    """C_I, E_{I,j} and D_{I,j} for one pair of scales n <= m.

    ``recipe`` is ``"cantor"`` (E_{I,j} = B(C_I, c j r_n / k)) or ``"sard"``
    (E_{I,j} = C of the j 2^-m neighbourhood of the interval I).
    """

    def __init__(self, family: BoxFamily, model: DistanceModel, c, n: int, m: int, k_nm: int, q: int,
                 h: float | None = None):
        if m < n:
            raise ValueError("need m >= n")
        if n < 1:
            raise ValueError("need n >= 1")
        if family.N < m:
            raise ValueError(f"family depth {family.N} is below m = {m}")
        self.recipe = "cantor" if isinstance(model, CantorModel) else "sard"
        self.c = Fraction(c) if isinstance(c, (int, Fraction)) else c
        if self.recipe == "cantor" and not 0 < self.c <= Fraction(1, 6):
            raise ValueError("the Cantor recipe needs 0 < c <= 1/6")
        self.family, self.model = family, model
        self.n, self.m, self.k, self.q = n, m, int(k_nm), q
        self.r_n = model.rho_sup(Code("0" * n))
        self.r_m = model.rho_sup(Code("0" * m))
        self.w = self.c * self.r_m
        finest = float(self.w) / 4
        self.h = finest if h is None else h
        if self.h > finest * (1 + 1e-12):
            raise ResolutionError(f"h = {self.h} too coarse; need h <= c r_m / 4 = {finest}")
        self.C = lru_cache(maxsize=None)(self._C)
        self.E = lru_cache(maxsize=None)(self._E)

    # -- the sets ----------------------------------------------------------

    def _interval_union(self, a: Fraction, b: Fraction) -> BallUnion:
        N = self.family.N
        cs, dists = [], []
        for t in range(N + 1):
            size = Fraction(1, 2**t)
            first = max(0, math.ceil(a / size))
            last = min(2**t - 1, math.floor(b / size) - 1)
            for i in range(first, last + 1):
                left = i * size
                dist = min(left - a, b - left - size)
                if dist > 0:
                    cs.append(Code.from_index(i, t))
                    dists.append(float(dist))
        if not cs:
            return BallUnion([], [], [])
        radii = self.c * om.invert_many(self.model.spec, np.array(dists))
        boxes = [self.family.rect(x) for x in cs]
        return BallUnion([b.lo for b in boxes], [b.hi for b in boxes], [float(r) for r in radii]).simplify()

    def _C(self, I: Code) -> BallUnion:
        if self.recipe == "cantor":
            rho = self.model.rho_sup(I)
            if rho == math.inf:
                raise ValueError("C of the root is unbounded in the Cantor model")
            box = self.family.rect(I)
            # every A_J with J inside I sits in A_I and gets the same radius
            return BallUnion([box.lo], [box.hi], [self.c * rho])
        a, b = dyadic_interval(I)
        return self._interval_union(a, b)

    def _E(self, I: Code, j: int) -> BallUnion:
        if self.recipe == "cantor":
            return self.C(I).dilate(Fraction(self.c) * j * Fraction(self.r_n) / self.k)
        if j == 0:
            return self.C(I)
        a, b = dyadic_interval(I)
        eps = Fraction(j, 2**self.m)
        return self._interval_union(a - eps, b + eps)

    def D(self, I: Code, j: int) -> tuple[BallUnion, BallUnion]:
        """(outer, inner) with D_{I,j} = outer minus inner."""
        E = self.E(I, j)
        return E.dilate(self.w), E

    def trimmed(self, top: Code, depth: int) -> list[Code]:
        inside = [Code(top.bits + x.bits) for x in codes(depth - top.depth)]
        if self.recipe == "sard":
            return inside[2:-2]
        return inside

    def grid(self, s: BallUnion) -> GridSet:
        return s.raster(local_frame([s], self.h))


def assemble_property_family(family: BoxFamily, model: DistanceModel, c, n: int, m: int, k_nm: int,
                             q: int, h: float | None = None) -> PropertyFamily:
    return PropertyFamily(family, model, c, n, m, k_nm, q, h)


@dataclass
class PropertyReport:
    n: int
    m: int
    k: int
    q: int
    recipe: str
    p1_max_count: int = 0
    p1_scope: str = "disjoint pairs only"
    p2_min_ratio: float = math.inf
    p3_ok: bool = True
    p4_max_count: int = 0
    p5_max_sum: int | None = None
    p5_normalized: float | None = None
    p5_exact: bool = True
    p6_ok: bool | None = None
    p7_ok: bool | None = None
    decisions: Decisions = field(default_factory=Decisions)
    passed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["decisions"] = dict(self.decisions.__dict__)
        return out


def _p5(pf: PropertyFamily, tally: Decisions) -> tuple[int, bool]:
    level = list(codes(pf.n))
    if pf.recipe == "cantor":
        # every E_{I,j} is a dilation of C_I, so the count depends on dist(x, C_I) only
        step = pf.c * pf.r_n / pf.k
        t = [step * j for j in range(pf.k)]
        best = 0
        lo = 0
        for hi_idx, s in enumerate(t):
            while t[lo] <= s - pf.w:
                lo += 1
            best = max(best, hi_idx - lo + 1)
        supports = [pf.D(I, pf.k - 1)[0] for I in level]
        overlap = any(supports[a].intersects(supports[b])
                      for a in range(len(level)) for b in range(a + 1, len(level)))
        tally.exact += 1
        if not overlap:
            return best, True
        return best * len(level), False
    outers = [pf.D(I, j)[0] for I in level for j in range(pf.k)]
    frame = local_frame(outers, pf.h)
    total = np.zeros(frame.shape, dtype=np.int32)
    for I in level:
        for j in range(pf.k):
            outer, inner = pf.D(I, j)
            total += (outer.raster(frame) - inner.raster(frame)).mask
    tally.grid += 1
    return int(total.max()), False


def check_properties(pf: PropertyFamily, thresholds: dict | None = None) -> PropertyReport:
    """Measure (P1)-(P7) on one assembled family.

    Constants are reported; ``thresholds`` (keys ``p1_max_count``,
    ``p4_max_count``, ``p5_normalized``: upper bounds; ``p2_min_ratio``:
    lower bound) turn them into pass/fail entries of ``passed``.
    """
    rep = PropertyReport(pf.n, pf.m, pf.k, pf.q, pf.recipe)
    tally = rep.decisions
    n_codes, m_codes = list(codes(pf.n)), list(codes(pf.m))

    # P1
    for I in n_codes:
        big = pf.C(I).dilate(pf.w)
        cnt = sum(1 for J in m_codes if not nested(I, J) and big.intersects(pf.C(J).dilate(pf.w)))
        tally.exact += len(m_codes)
        rep.p1_max_count = max(rep.p1_max_count, cnt)

    # P2
    rep.p2_min_ratio = min(float(pf.C(I).inscribed_radius()) / float(pf.r_n) for I in n_codes)

    # P3
    for I in n_codes:
        for j in range(pf.k):
            tally.exact += 1
            if not pf.C(I).within(pf.E(I, j)):
                tally.grid += 1
                fr = local_frame([pf.C(I)], pf.h)
                if not pf.C(I).raster(fr).issubset(pf.E(I, j).raster(fr)):
                    rep.p3_ok = False

    # P4: E_{I,j} grows with j, so C_J inside E_{I,0} rules out every j
    def hits(I: Code, target: BallUnion) -> int:
        widest = pf.D(I, pf.k - 1)[0]
        if not widest.intersects(target) or target.within(pf.E(I, 0)):
            tally.exact += 1
            return 0
        return sum(annulus_meets(*pf.D(I, j), target, pf.h, tally) for j in range(pf.k))

    for J in m_codes:
        cnt = sum(hits(I, pf.C(J)) for I in n_codes)
        rep.p4_max_count = max(rep.p4_max_count, cnt)

    # P5
    if pf.m > pf.n:
        rep.p5_max_sum, rep.p5_exact = _p5(pf, tally)
        rep.p5_normalized = rep.p5_max_sum / (pf.k * float(pf.r_m) / float(pf.r_n))

    # P6, P7 on the three scales n - q < n < m
    top_depth = pf.n - pf.q
    if top_depth >= 0 and pf.m >= pf.n + pf.q and not (pf.recipe == "cantor" and top_depth == 0):
        rep.p6_ok, rep.p7_ok = True, True
        for top in codes(top_depth):
            C_top = pf.C(top)
            inner_n = pf.trimmed(top, pf.n)
            keep_m = set(x.bits for x in pf.trimmed(top, pf.m))
            outsiders = [J for J in m_codes if J.bits not in keep_m]
            for Ip in inner_n:
                if not pf.D(Ip, pf.k - 1)[0].within(C_top):
                    if not all(annulus_within(*pf.D(Ip, j), C_top, pf.h, tally) for j in range(pf.k)):
                        rep.p6_ok = False
                else:
                    tally.exact += 1
                for J in outsiders:
                    if hits(Ip, pf.C(J)):
                        rep.p7_ok = False
    elif pf.recipe == "cantor" and top_depth == 0 and pf.m >= pf.n + pf.q:
        # C of the root is the whole space in the Cantor model
        rep.p6_ok, rep.p7_ok = True, True

    if thresholds:
        for key, bound in thresholds.items():
            val = getattr(rep, key)
            if val is None:
                continue
            rep.passed[key] = val >= bound if key == "p2_min_ratio" else val <= bound
    return rep


@dataclass
class KConditionReport:
    k1_sup: float
    k1_sums: dict
    k1_tail_ratio: float
    k1_certified: bool
    k2_threshold: int | None

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["k1_sums"] = {str(n): v for n, v in self.k1_sums.items()}
        return out


def k_law(base: float) -> Callable[[int, int], float]:
    """k_{n,m} = base**(m - n)."""
    return lambda n, m: float(base) ** (m - n)


def check_k_conditions(k, d: int, C: int = 1, n_max: int = 40) -> KConditionReport:
    """Finite-range evidence for the summability and smallness conditions on k_{n,m}.

    ``k`` is a callable ``k(n, m)`` or a mapping keyed by ``(n, m)``.  The
    summability sup is certified only when the terms end in a geometric
    decay (ratio below one), which lets the tail be bounded.
    """
    kf = k if callable(k) else (lambda n, m: k[(n, m)])
    sums, last_terms = {}, None
    for n in range(1, n_max + 1):
        terms = [2.0 ** ((m - n) / d) / kf(n, m) for m in range(n, n_max + 1)]
        sums[n] = float(np.sum(terms))
        if n == 1:
            last_terms = terms
    ratio = last_terms[-1] / last_terms[-2] if len(last_terms) > 1 else math.nan
    certified = bool(ratio < 1 - 1e-9)
    limit = 1.0 / (4 * C)
    threshold = None
    for g in range(0, n_max):
        if all(2.0 ** (gg / d) / kf(n, n + gg) < limit
               for gg in range(g, n_max) for n in range(1, n_max - gg + 1)):
            threshold = g
            break
    return KConditionReport(
        k1_sup=max(sums.values()),
        k1_sums=sums,
        k1_tail_ratio=ratio,
        k1_certified=certified,
        k2_threshold=threshold,
    )
