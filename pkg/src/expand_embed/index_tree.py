"""Binary codes, dyadic intervals and the two distance models on codes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from . import modulus as om
from .modulus import ModulusSpec

MAX_DEPTH = 63


@dataclass(frozen=True, order=True)
class Code:
    """A finite 0/1 string; ``Code("")`` is the root."""

    bits: str = ""

    def __post_init__(self):
        if any(b not in "01" for b in self.bits):
            raise ValueError(f"not a binary code: {self.bits!r}")
        if len(self.bits) > MAX_DEPTH:
            raise ValueError(f"depth {len(self.bits)} exceeds {MAX_DEPTH}")

    @classmethod
    def parse(cls, text: str) -> "Code":
        text = text.strip()
        return cls("" if text in ("", "ε", "e") else text)

    @classmethod
    def from_index(cls, index: int, depth: int) -> "Code":
        return cls(format(index, f"0{depth}b") if depth else "")

    @property
    def depth(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        return int(self.bits, 2) if self.bits else 0

    @property
    def parent(self) -> "Code":
        return Code(self.bits[:-1])

    def child(self, bit: int | str) -> "Code":
        return Code(self.bits + str(bit))

    def is_within(self, other: "Code") -> bool:
        """True when this code's interval lies inside ``other``'s (prefix test)."""
        return self.bits.startswith(other.bits)

    def __str__(self) -> str:
        return self.bits or "ε"


def codes(depth: int) -> Iterator[Code]:
    for i in range(2**depth):
        yield Code.from_index(i, depth)


def codes_upto(depth: int) -> Iterator[Code]:
    for n in range(depth + 1):
        yield from codes(n)


class Kind(enum.Enum):
    ANCESTOR = "Ancestor"
    DESCENDANT = "Descendant"
    EQUAL = "Equal"
    DISJOINT = "Disjoint"


@dataclass(frozen=True)
class Relation:
    kind: Kind
    k: int | None = None  # first differing position (1-based) for DISJOINT


def first_difference(a: str, b: str) -> int | None:
    for i, (x, y) in enumerate(zip(a, b), start=1):
        if x != y:
            return i
    return None


def relate(I: Code, J: Code) -> Relation:
    """ANCESTOR means I is a prefix of J (J's interval sits inside I's)."""
    k = first_difference(I.bits, J.bits)
    if k is not None:
        return Relation(Kind.DISJOINT, k)
    if I.depth == J.depth:
        return Relation(Kind.EQUAL)
    return Relation(Kind.ANCESTOR if I.depth < J.depth else Kind.DESCENDANT)


def nested(I: Code, J: Code) -> bool:
    return relate(I, J).kind is not Kind.DISJOINT


def dyadic_interval(I: Code) -> tuple[Fraction, Fraction]:
    left = Fraction(I.index, 2**I.depth)
    return left, left + Fraction(1, 2**I.depth)


def interval_gap(I: Code, J: Code) -> Fraction:
    a0, a1 = dyadic_interval(I)
    b0, b1 = dyadic_interval(J)
    return max(Fraction(0), b0 - a1, a0 - b1)


class DistanceModel:
    """A distance function on codes: zero on nested pairs, symmetric, monotone."""

    def rho(self, I: Code, J: Code) -> float:
        raise NotImplementedError

    def rho_inner(self, J: Code, I: Code) -> float:
        raise NotImplementedError

    def rho_sup(self, I: Code) -> float:
        raise NotImplementedError

    def level_sup(self, k: int, N: int) -> float:
        """Largest rho between depth-N codes whose first difference is at ``k``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CantorModel(DistanceModel):
    """rho(I, J) = r_k where k is the first position at which I and J differ."""

    r: tuple

    def __post_init__(self):
        if not self.r:
            raise ValueError("empty r-sequence")
        if any(x <= 0 for x in self.r):
            raise ValueError("r-sequence must be positive")
        if any(b > a for a, b in zip(self.r, self.r[1:])):
            raise ValueError("r-sequence must be nonincreasing")

    @classmethod
    def geometric(cls, base: int, N: int) -> "CantorModel":
        """r_n = base**-n as exact rationals."""
        return cls(tuple(Fraction(1, base**n) for n in range(1, N + 1)))

    def r_at(self, n: int):
        if n < 1 or n > len(self.r):
            raise IndexError(f"r_{n} not available (have 1..{len(self.r)})")
        return self.r[n - 1]

    def rho(self, I: Code, J: Code):
        rel = relate(I, J)
        if rel.kind is not Kind.DISJOINT:
            return 0
        return self.r_at(rel.k)

    def rho_inner(self, J: Code, I: Code):
        if not J.is_within(I):
            raise ValueError(f"{J} is not inside {I}")
        return math.inf if I.depth == 0 else self.r_at(I.depth)

    def rho_sup(self, I: Code):
        return math.inf if I.depth == 0 else self.r_at(I.depth)

    def level_sup(self, k: int, N: int):
        return self.r_at(k)

    def to_dict(self) -> dict:
        return {"variant": "cantor", "r": [str(x) if isinstance(x, Fraction) else x for x in self.r]}


@dataclass(frozen=True)
class SardModel(DistanceModel):
    """rho(I, J) = omega^{-1}(gap between the closed dyadic intervals)."""

    spec: ModulusSpec

    def rho(self, I: Code, J: Code) -> float:
        if nested(I, J):
            return 0.0
        gap = interval_gap(I, J)
        return om.invert(self.spec, float(gap)) if gap > 0 else 0.0

    def rho_inner(self, J: Code, I: Code) -> float:
        """omega^{-1} of the distance from J to the complement of I in the line."""
        if not J.is_within(I):
            raise ValueError(f"{J} is not inside {I}")
        a0, a1 = dyadic_interval(I)
        b0, b1 = dyadic_interval(J)
        dist = min(b0 - a0, a1 - b1)
        return om.invert(self.spec, float(dist)) if dist > 0 else 0.0

    def rho_sup(self, I: Code) -> float:
        return self._r(I.depth)

    def _r(self, n: int) -> float:
        return om.invert(self.spec, 2.0 ** -(n + 1))

    def level_sup(self, k: int, N: int) -> float:
        gap = 2.0 ** -(k - 1) - 2.0 ** (1 - N)
        return om.invert(self.spec, gap) if gap > 0 else 0.0

    def to_dict(self) -> dict:
        return {"variant": "sard", "spec": self.spec.to_dict()}


def model_from_dict(data: dict) -> DistanceModel:
    if data["variant"] == "cantor":
        return CantorModel(tuple(Fraction(x) if isinstance(x, str) else x for x in data["r"]))
    return SardModel(ModulusSpec.from_dict(data["spec"]))


def exceptional_counts(
    model: DistanceModel, r: Sequence[float], n_max: int = 5, m_max: int = 8, factor: float = 0.25
) -> dict[tuple[int, int], int]:
    """For each (n, m), the largest number of depth-m codes J disjoint from a
    depth-n code I with rho(I, J) < factor * r_m.

    ``r[m-1]`` is r_m.  Only m >= n is examined.
    """
    out = {}
    for n in range(1, n_max + 1):
        for m in range(n, m_max + 1):
            thresh = factor * r[m - 1]
            worst = 0
            for I in codes(n):
                cnt = sum(
                    1
                    for J in codes(m)
                    if not nested(I, J) and model.rho(I, J) < thresh
                )
                worst = max(worst, cnt)
            out[(n, m)] = worst
    return out
