"""Bitmap sets on a regular grid, Euclidean dilation and perimeter estimates."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage


class ResolutionError(ValueError):
    """The grid is too coarse (or too large) for the requested operation."""


@dataclass(frozen=True)
class Frame:
    """Cell ``idx`` has center ``origin + (idx + 0.5) * h``."""

    h: float
    origin: tuple[float, ...]
    shape: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.shape)

    @classmethod
    def around(cls, lo: Sequence[float], hi: Sequence[float], h: float, margin: float = 0.0) -> "Frame":
        """Smallest h-aligned frame covering [lo - margin, hi + margin]."""
        origin = tuple(math.floor((float(a) - margin) / h) * h for a in lo)
        shape = tuple(
            max(1, math.ceil((float(b) + margin - o) / h)) for o, b in zip(origin, hi)
        )
        return cls(h, origin, shape)

    @property
    def cells(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list[np.ndarray]:
        return [o + (np.arange(n) + 0.5) * self.h for o, n in zip(self.origin, self.shape)]

    def centers(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij", sparse=True)

    def to_dict(self) -> dict:
        return {"h": self.h, "origin": list(self.origin), "shape": list(self.shape), "d": self.d}


@dataclass
class GridSet:
    frame: Frame
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.frame.shape:
            raise ValueError("mask shape does not match frame")
        if self.frame.d not in (2, 3):
            raise ValueError("only d = 2 and d = 3 grids are supported")

    @classmethod
    def empty(cls, frame: Frame) -> "GridSet":
        return cls(frame, np.zeros(frame.shape, dtype=bool))

    @classmethod
    def from_boxes(cls, frame: Frame, boxes: Sequence[tuple[Sequence[float], Sequence[float]]]) -> "GridSet":
        """Cells whose centers lie in the closed union of the boxes."""
        mask = np.zeros(frame.shape, dtype=bool)
        axes = frame.axes()
        for lo, hi in boxes:
            sl = []
            for ax, a, b in zip(axes, lo, hi):
                i0 = int(np.searchsorted(ax, float(a) - 1e-12 * frame.h, side="left"))
                i1 = int(np.searchsorted(ax, float(b) + 1e-12 * frame.h, side="right"))
                if i1 <= i0:
                    # thinner than a cell: keep the cell holding the low edge
                    i0 = min(max(int((float(a) - ax[0]) / frame.h + 0.5), 0), len(ax) - 1)
                    i1 = i0 + 1
                sl.append(slice(i0, i1))
            mask[tuple(sl)] = True
        return cls(frame, mask)

    @classmethod
    def ball(cls, frame: Frame, center: Sequence[float], radius: float) -> "GridSet":
        grids = frame.centers()
        sq = sum((g - c) ** 2 for g, c in zip(grids, center))
        return cls(frame, np.broadcast_to(sq <= radius * radius, frame.shape).copy())

    @property
    def h(self) -> float:
        return self.frame.h

    @property
    def d(self) -> int:
        return self.frame.d

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def measure(self) -> float:
        return self.h**self.d * self.count

    def is_empty(self) -> bool:
        return not self.mask.any()

    def _same(self, other: "GridSet"):
        if other.frame != self.frame:
            raise ValueError("grid sets live on different frames")

    def __or__(self, other: "GridSet") -> "GridSet":
        self._same(other)
        return GridSet(self.frame, self.mask | other.mask)

    def __and__(self, other: "GridSet") -> "GridSet":
        self._same(other)
        return GridSet(self.frame, self.mask & other.mask)

    def __sub__(self, other: "GridSet") -> "GridSet":
        self._same(other)
        return GridSet(self.frame, self.mask & ~other.mask)

    def issubset(self, other: "GridSet") -> bool:
        self._same(other)
        return not np.any(self.mask & ~other.mask)

    def distance_field(self) -> np.ndarray:
        """Distance from each cell center to the nearest occupied cell center."""
        if self.is_empty():
            return np.full(self.frame.shape, np.inf)
        return ndimage.distance_transform_edt(~self.mask, sampling=self.h)

    def _check_room(self, r: float):
        idx = np.nonzero(self.mask)
        pad = math.ceil(r / self.h)
        for ax, n in zip(idx, self.frame.shape):
            if ax.min() - pad < 0 or ax.max() + pad > n - 1:
                raise ResolutionError(f"frame too small to dilate by {r}; enlarge its margin")

    # -- export -----------------------------------------------------------

    def save(self, path):
        """Write a binary PGM (2-D) or raw .npy (3-D) plus a JSON sidecar."""
        path = Path(path)
        if self.d == 2:
            data = np.where(self.mask, 255, 0).astype(np.uint8)
            with open(path, "wb") as fh:
                fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode())
                fh.write(data.tobytes())
        else:
            np.save(path, self.mask)
        path.with_suffix(".json").write_text(json.dumps(self.frame.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "GridSet":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        frame = Frame(meta["h"], tuple(meta["origin"]), tuple(meta["shape"]))
        if meta["d"] == 2:
            raw = path.read_bytes()
            parts = raw.split(maxsplit=4)
            w, hgt = int(parts[1]), int(parts[2])
            data = np.frombuffer(parts[4][: w * hgt], dtype=np.uint8).reshape(hgt, w)
            return cls(frame, data > 0)
        return cls(frame, np.load(path))


def dilate(S: GridSet, r: float) -> GridSet:
    """Cells whose centers are within distance r of an occupied cell center."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if S.is_empty():
        return GridSet.empty(S.frame)
    if r < S.h:
        warnings.warn("dilation radius below one cell is unreliable", stacklevel=2)
    S._check_room(r)
    return GridSet(S.frame, S.distance_field() <= r + 1e-9 * S.h)


ISO_CONSTANT_3D = (36 * math.pi) ** (1 / 3)


def iso_lower(measure: float, d: int) -> float:
    if d == 2:
        return 2 * math.sqrt(math.pi * measure)
    return ISO_CONSTANT_3D * measure ** ((d - 1) / d)


def _quotient(dist: np.ndarray, h: float, d: int, r1: float, r2: float) -> float:
    eps = 1e-9 * h
    outer = np.count_nonzero(dist <= r1 + r2 + eps)
    inner = np.count_nonzero(dist <= r1 + eps)
    return (outer - inner) * h**d / r2


def p0_estimate(S: GridSet, r1: float, r2: float) -> float:
    """(|B(S, r1 + r2)| - |B(S, r1)|) / r2 on the grid."""
    if r1 < 2 * S.h * (1 - 1e-12) or r2 < 2 * S.h * (1 - 1e-12):
        raise ResolutionError("r1 and r2 must be at least two cells")
    if S.is_empty():
        return 0.0
    S._check_room(r1 + r2)
    return _quotient(S.distance_field(), S.h, S.d, r1, r2)


@dataclass
class PerimeterEstimate:
    p0_hat: float
    p_hat: float
    iso_lower: float
    grid_error_bound: float
    sweep: list[float]
    sweep_values: list[float]
    r2: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def default_sweep(h: float) -> list[float]:
    return [2 * h, 4 * h, 8 * h]


def p_estimate(S: GridSet, sweep: Sequence[float] | None = None, r2: float | None = None) -> PerimeterEstimate:
    """Minimum of the annulus quotient of B(S, r1) over the sweep of r1.

    Every sweep point is an upper estimate of the minimal perimeter, taken
    over the supersets T = B(S, r1).  ``grid_error_bound`` is the relative
    error h / r2 allowed for one cell of boundary displacement.
    """
    sweep = list(default_sweep(S.h) if sweep is None else sweep)
    if not sweep:
        raise ValueError("sweep must be nonempty")
    r2 = 4 * S.h if r2 is None else r2
    if S.is_empty():
        vals = [0.0] * len(sweep)
    else:
        if min(min(sweep), r2) < 2 * S.h * (1 - 1e-12):
            raise ResolutionError("sweep radii and r2 must be at least two cells")
        S._check_room(max(sweep) + r2)
        dist = S.distance_field()
        vals = [_quotient(dist, S.h, S.d, r1, r2) for r1 in sweep]
    return PerimeterEstimate(
        p0_hat=vals[0],
        p_hat=min(vals),
        iso_lower=iso_lower(S.measure, S.d),
        grid_error_bound=S.h / r2,
        sweep=[float(x) for x in sweep],
        sweep_values=vals,
        r2=r2,
    )


@dataclass
class PeriCheck:
    rr_ok: bool
    subadd_ok: bool
    diff_ok: bool
    key_ok: bool
    margins: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_key(sets: Sequence[GridSet], r: float, tol: float = 0.1, **pkw) -> tuple[bool, float]:
    """|B(S0, r) minus the union of all S_j| >= (1-tol) r P(S0) - (1+tol) r sum_{j>=1} P(S_j)."""
    if not 1 <= len(sets) <= 8:
        raise ValueError("key inequality is checked for 1 to 8 sets")
    S0 = sets[0]
    union = sets[0]
    for s in sets[1:]:
        union = union | s
    lhs = (dilate(S0, r) - union).measure
    p = [p_estimate(s, **pkw).p_hat for s in sets]
    rhs = (1 - tol) * r * p[0] - (1 + tol) * r * sum(p[1:])
    return lhs >= rhs, lhs - rhs


def check_peri(S1: GridSet, S2: GridSet, r: float, tol: float = 0.1, **pkw) -> PeriCheck:
    """Subadditivity, the difference bound and the dilation bound, with ``tol`` slack."""
    if r < 2 * S1.h * (1 - 1e-12):
        raise ResolutionError("r must be at least two cells")
    p1 = p_estimate(S1, **pkw).p_hat
    p2 = p_estimate(S2, **pkw).p_hat
    p12 = p_estimate(S1 | S2, **pkw).p_hat
    rr_lhs = (dilate(S1, r) - S1).measure
    rr_margin = rr_lhs - (1 - tol) * r * p1
    sub_margin = (1 + tol) * (p1 + p2) - p12
    diff_lhs = (dilate(S1, r) - (S1 | S2)).measure
    diff_margin = diff_lhs - ((1 - tol) * r * p1 - (1 + tol) * r * p2)
    key_ok, key_margin = check_key([S1, S2], r, tol, **pkw)
    return PeriCheck(
        rr_ok=rr_margin >= 0,
        subadd_ok=sub_margin >= 0,
        diff_ok=diff_margin >= 0,
        key_ok=key_ok,
        margins={"rr": rr_margin, "subadd": sub_margin, "diff": diff_margin, "key": key_margin},
    )


def random_box_union(rng: np.random.Generator, frame: Frame, n_boxes: int, d: int = 2,
                     lo: float = 0.0, hi: float = 1.0, min_side: float = 0.05, max_side: float = 0.5):
    """Boxes with random corners inside [lo, hi]^d; returns (GridSet, boxes)."""
    boxes = []
    for _ in range(n_boxes):
        side = rng.uniform(min_side, max_side, size=d)
        corner = rng.uniform(lo, hi - side)
        boxes.append((tuple(corner), tuple(corner + side)))
    return GridSet.from_boxes(frame, boxes), boxes
