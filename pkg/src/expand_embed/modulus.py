"""Moduli of continuity: evaluation, inversion, admissibility and the series test.

A modulus is one of three families on a bounded domain:

* ``power``    omega(r) = r**p
* ``powerlog`` omega(r) = r**p * ln(e/r)**a
* ``table``    samples (r, omega) joined log-linearly

together with the ambient dimension ``dim``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BISECTION_RTOL = 1e-12
CLASSIFY_MIN_N = 8


class DomainError(ValueError):
    """Argument outside the domain of the modulus."""


class RangeError(ValueError):
    """Target value outside the range of the modulus."""


class InvalidSpecError(ValueError):
    """The modulus description itself is unusable."""


@dataclass(frozen=True)
class ModulusSpec:
    family: str
    dim: int = 2
    p: float = 2.0
    a: float = 0.0
    samples: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.family not in ("power", "powerlog", "table"):
            raise InvalidSpecError(f"unknown family {self.family!r}")
        if self.dim < 1:
            raise InvalidSpecError("dim must be positive")
        if self.family in ("power", "powerlog") and not self.p > 0:
            raise InvalidSpecError("p must be positive")
        if self.family == "table":
            if len(self.samples) < 2:
                raise InvalidSpecError("table needs at least two samples")
            rs = [s[0] for s in self.samples]
            if any(r <= 0 for r in rs) or any(b <= a for a, b in zip(rs, rs[1:])):
                raise InvalidSpecError("table radii must be positive and strictly increasing")
            if any(s[1] <= 0 for s in self.samples):
                raise InvalidSpecError("table values must be positive")
            if self.samples[0][1] >= 0.5:
                raise InvalidSpecError("first table value must be below 1/2")

    @classmethod
    def power(cls, p: float, dim: int = 2) -> "ModulusSpec":
        return cls("power", dim=dim, p=float(p))

    @classmethod
    def powerlog(cls, p: float, a: float, dim: int = 2) -> "ModulusSpec":
        return cls("powerlog", dim=dim, p=float(p), a=float(a))

    @classmethod
    def table(cls, samples: Sequence[tuple[float, float]], dim: int = 2) -> "ModulusSpec":
        return cls("table", dim=dim, samples=tuple((float(r), float(w)) for r, w in samples))

    @classmethod
    def from_csv(cls, path, dim: int = 2) -> "ModulusSpec":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"r", "omega"} <= set(reader.fieldnames):
                raise InvalidSpecError("table CSV needs header 'r,omega'")
            rows = [(float(row["r"]), float(row["omega"])) for row in reader]
        return cls.table(rows, dim=dim)

    @property
    def r_max(self) -> float:
        """Upper end of the domain.

        For ``powerlog`` with ``a > p`` the closed form stops increasing at
        ``exp(1 - a/p) < 1``; the domain is cut there.
        """
        if self.family == "table":
            return self.samples[-1][0]
        if self.family == "powerlog" and self.a > self.p:
            return math.exp(1.0 - self.a / self.p)
        return 1.0

    def to_dict(self) -> dict:
        out = {"family": self.family, "dim": self.dim}
        if self.family == "table":
            out["samples"] = [list(s) for s in self.samples]
        else:
            out["p"] = self.p
            if self.family == "powerlog":
                out["a"] = self.a
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModulusSpec":
        if data["family"] == "table":
            return cls.table([tuple(s) for s in data["samples"]], dim=data["dim"])
        return cls(data["family"], dim=data["dim"], p=data["p"], a=data.get("a", 0.0))


def _eval_array(spec: ModulusSpec, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    if spec.family == "power":
        out[pos] = rp ** spec.p
    elif spec.family == "powerlog":
        out[pos] = rp ** spec.p * (1.0 - np.log(rp)) ** spec.a
    else:
        lr = np.log([s[0] for s in spec.samples])
        lw = np.log([s[1] for s in spec.samples])
        x = np.log(rp)
        y = np.interp(x, lr, lw)
        # below the table: continue the first segment
        slope = (lw[1] - lw[0]) / (lr[1] - lr[0])
        low = x < lr[0]
        y[low] = lw[0] + slope * (x[low] - lr[0])
        out[pos] = np.exp(y)
    return out


def eval_many(spec: ModulusSpec, r) -> np.ndarray:
    """Vectorised ``eval`` without domain checks."""
    return _eval_array(spec, r)


def eval(spec: ModulusSpec, r: float) -> float:  # noqa: A001 - mirrors the math symbol
    r = float(r)
    if r < 0 or r > spec.r_max * (1 + 1e-15):
        raise DomainError(f"r={r} outside [0, {spec.r_max}]")
    if r == 0:
        return 0.0
    return float(_eval_array(spec, np.array([r]))[0])


def _check_table_monotone(spec: ModulusSpec):
    ws = [s[1] for s in spec.samples]
    if any(b <= a for a, b in zip(ws, ws[1:])):
        raise InvalidSpecError("table values are not strictly increasing")


def invert(spec: ModulusSpec, y: float, rtol: float = BISECTION_RTOL) -> float:
    """Return r with omega(r) = y, by bisection on the increasing modulus."""
    y = float(y)
    if spec.family == "table":
        _check_table_monotone(spec)
    hi = spec.r_max
    top = eval(spec, hi)
    if not 0 < y <= top * (1 + 1e-15):
        raise RangeError(f"y={y} outside (0, {top}]")
    if y >= top:
        return hi
    lo = 0.0
    # float bisection: stop at bracket width ~ rtol * r, or when floats run out
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if eval(spec, mid) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * 1e-3 * hi:
            break
    return hi if abs(eval(spec, hi) - y) <= abs(eval(spec, lo) - y) else lo


def invert_many(spec: ModulusSpec, ys, iterations: int = 200) -> np.ndarray:
    """Vectorised bisection; zeros map to zero."""
    ys = np.asarray(ys, dtype=float)
    if spec.family == "table":
        _check_table_monotone(spec)
    top = eval(spec, spec.r_max)
    if np.any(ys < 0) or np.any(ys > top * (1 + 1e-15)):
        raise RangeError(f"targets outside [0, {top}]")
    lo = np.zeros_like(ys)
    hi = np.full_like(ys, spec.r_max)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = _eval_array(spec, mid) < ys
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(ys == 0, 0.0, hi)


@dataclass
class AdmissibilityReport:
    monotone_ok: bool
    convex_ok: bool
    ratio_decreasing_ok: bool
    doubling_constant: float
    lipschitz_constant: float
    grid: dict

    @property
    def all_ok(self) -> bool:
        return self.monotone_ok and self.convex_ok and self.ratio_decreasing_ok

    def to_dict(self) -> dict:
        return {
            "monotone_ok": self.monotone_ok,
            "convex_ok": self.convex_ok,
            "ratio_decreasing_ok": self.ratio_decreasing_ok,
            "doubling_constant": self.doubling_constant,
            "lipschitz_constant": self.lipschitz_constant,
            "grid": self.grid,
        }


def check_admissibility(
    spec: ModulusSpec, grid_size: int = 64, r_min: float | None = None, r_max: float | None = None
) -> AdmissibilityReport:
    """Test the hypotheses on omega over a geometric grid.

    Every flag holds for the sampled points only; ``grid`` records which.
    Doubling is sup omega(2r)/omega(r); the Lipschitz constant is
    sup (omega(r + alpha R) - omega(r)) / (alpha omega(R)) over R >= r and
    alpha in a fixed ladder.
    """
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    r_max = spec.r_max if r_max is None else min(r_max, spec.r_max)
    r_min = 1e-6 * r_max if r_min is None else r_min
    rs = np.geomspace(r_min, r_max, grid_size)
    w = _eval_array(spec, rs)
    eps = 1e-12

    monotone_ok = bool(np.all(np.diff(w) > 0))

    convex_ok = True
    for step in range(1, 5):
        x, y = rs[:-step], rs[step:]
        mid = _eval_array(spec, 0.5 * (x + y))
        if np.any(mid > 0.5 * (w[:-step] + w[step:]) * (1 + eps)):
            convex_ok = False
    if np.any(_eval_array(spec, 0.5 * rs) > 0.5 * w * (1 + eps)):
        convex_ok = False

    u = w / rs ** spec.dim
    ratio_ok = bool(np.all(u[1:] <= u[:-1] * (1 + eps)))

    half = rs[rs <= 0.5 * r_max]
    doubling = float(np.max(_eval_array(spec, 2 * half) / _eval_array(spec, half))) if half.size else math.nan

    alphas = np.array([1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0])
    r_, R_, al = np.meshgrid(rs, rs, alphas, indexing="ij")
    keep = (R_ >= r_) & (r_ + al * R_ <= r_max)
    r_, R_, al = r_[keep], R_[keep], al[keep]
    lip = (_eval_array(spec, r_ + al * R_) - _eval_array(spec, r_)) / (al * _eval_array(spec, R_))
    lipschitz = float(np.max(lip)) if lip.size else math.nan

    return AdmissibilityReport(
        monotone_ok=monotone_ok,
        convex_ok=convex_ok,
        ratio_decreasing_ok=ratio_ok,
        doubling_constant=doubling,
        lipschitz_constant=lipschitz,
        grid={"size": grid_size, "r_min": float(r_min), "r_max": float(r_max), "spacing": "geometric"},
    )


@dataclass
class CriticalSequences:
    """``r[n-1]`` solves omega = 2**-(n+1); ``r_star[n-1]`` solves omega = 2**-(n-1)."""

    r: list[float]
    r_star: list[float]
    depth: int

    def to_dict(self) -> dict:
        return {"depth": self.depth, "index_origin": 1, "r": self.r, "r_star": self.r_star}


def critical_sequence(spec: ModulusSpec, N: int) -> CriticalSequences:
    if N < 1:
        raise ValueError("N must be at least 1")
    r = [invert(spec, 2.0 ** -(n + 1)) for n in range(1, N + 1)]
    r_star = [invert(spec, 2.0 ** -(n - 1)) for n in range(1, N + 1)]
    return CriticalSequences(r=r, r_star=r_star, depth=N)


@dataclass
class Classification:
    verdict: str  # "Convergent" | "Divergent" | "Unknown"
    partial_sums: list[float]
    terms: list[float]
    term_ratio_estimate: float
    index_origin: int = 1

    @property
    def tail_bound(self) -> float:
        """Geometric bound on the remaining tail, inf if the ratio is not below 1."""
        q = self.term_ratio_estimate
        if not q < 1:
            return math.inf
        return self.terms[-1] * q / (1 - q)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "index_origin": self.index_origin,
            "terms": self.terms,
            "partial_sums": self.partial_sums,
            "term_ratio_estimate": self.term_ratio_estimate,
            "tail_bound": self.tail_bound,
        }


def analytic_verdict(spec: ModulusSpec) -> str:
    d = spec.dim
    if spec.family == "table":
        return "Unknown"
    if spec.p < d:
        return "Convergent"
    if spec.p > d:
        return "Divergent"
    if spec.family == "power":
        return "Divergent"
    return "Convergent" if spec.a > d else "Divergent"


def classify(spec: ModulusSpec, N: int = 32) -> Classification:
    """Decide whether sum_n 2**(n/d) r_n converges.

    Closed-form families get the analytic answer; tables get ``Unknown``
    with the partial sums as evidence.
    """
    if N < CLASSIFY_MIN_N:
        raise ValueError(f"N must be at least {CLASSIFY_MIN_N}")
    seq = critical_sequence(spec, N)
    terms = [2.0 ** (n / spec.dim) * rn for n, rn in enumerate(seq.r, start=1)]
    partial = list(np.cumsum(terms))
    ratio = terms[-1] / terms[-2]
    return Classification(
        verdict=analytic_verdict(spec),
        partial_sums=[float(s) for s in partial],
        terms=terms,
        term_ratio_estimate=ratio,
    )
