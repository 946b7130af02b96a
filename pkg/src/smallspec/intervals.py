"""Exact integer interval sets on the frequency axis.

Every endpoint is a Python ``int``, so dilation, translation, union and
measure are exact.  Density ratios come back as :class:`fractions.Fraction`.
Intervals are closed: two intervals sharing an endpoint overlap, and they
merge under union.
"""
from __future__ import annotations

import json
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, List, Sequence, Tuple, Union

Number = Union[int, float, Fraction]


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _as_exact(value, name: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    # Fraction(float) is exact: 0.5 -> 1/2, 0.1 -> its binary value
    return Fraction(value)


@dataclass(frozen=True, order=True)
class FreqInterval:
    """Closed interval ``[lo, hi]`` with integer endpoints."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _as_int(self.lo, "lo"))
        object.__setattr__(self, "hi", _as_int(self.hi, "hi"))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> int:
        return self.hi - self.lo

    @property
    def radius(self) -> int:
        """Largest absolute endpoint."""
        return max(abs(self.lo), abs(self.hi))

    def contains(self, other: "FreqInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def to_list(self) -> List[int]:
        return [self.lo, self.hi]

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


@dataclass(frozen=True)
class FreqIntervalSet:
    """Sorted union of pairwise separated closed intervals.

    Build one with :meth:`of`, which accepts pairs in any order and merges
    overlapping or touching intervals.  The raw constructor expects parts
    that are already normalized and rejects anything else.
    """

    parts: Tuple[FreqInterval, ...] = ()

    def __post_init__(self) -> None:
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        for prev, nxt in zip(parts, parts[1:]):
            if not prev.hi < nxt.lo:
                raise ValueError(f"parts not normalized: {prev!r} then {nxt!r}")

    @classmethod
    def of(cls, items: Iterable) -> "FreqIntervalSet":
        ivs = []
        for item in items:
            if isinstance(item, FreqInterval):
                ivs.append(item)
            else:
                lo, hi = item
                ivs.append(FreqInterval(lo, hi))
        return cls(_merge(ivs))

    @classmethod
    def empty(cls) -> "FreqIntervalSet":
        return cls(())

    def __iter__(self) -> Iterator[FreqInterval]:
        return iter(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __bool__(self) -> bool:
        return bool(self.parts)

    def __repr__(self) -> str:
        if not self.parts:
            return "FreqIntervalSet(empty)"
        return "FreqIntervalSet(" + " u ".join(repr(p) for p in self.parts) + ")"

    def to_list(self) -> List[List[int]]:
        return [p.to_list() for p in self.parts]

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_json(cls, text: str) -> "FreqIntervalSet":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("expected a JSON array of [lo, hi] pairs")
        return cls.of(_pair(item) for item in data)


def _pair(item) -> Tuple[int, int]:
    if not isinstance(item, (list, tuple)) or len(item) != 2:
        raise ValueError(f"expected [lo, hi], got {item!r}")
    return _as_int(item[0], "lo"), _as_int(item[1], "hi")


def _merge(ivs: Sequence[FreqInterval]) -> Tuple[FreqInterval, ...]:
    out: List[FreqInterval] = []
    for iv in sorted(ivs):
        if out and iv.lo <= out[-1].hi:
            if iv.hi > out[-1].hi:
                out[-1] = FreqInterval(out[-1].lo, iv.hi)
        else:
            out.append(iv)
    return tuple(out)


def _coerce(s) -> FreqIntervalSet:
    if isinstance(s, FreqIntervalSet):
        return s
    if isinstance(s, FreqInterval):
        return FreqIntervalSet((s,))
    return FreqIntervalSet.of(s)


def dilate(s: FreqIntervalSet, factor: int) -> FreqIntervalSet:
    factor = _as_int(factor, "factor")
    if factor < 1:
        raise ValueError("dilation factor must be >= 1")
    s = _coerce(s)
    return FreqIntervalSet.of(FreqInterval(factor * p.lo, factor * p.hi) for p in s)


def translate(s: FreqIntervalSet, shift: int) -> FreqIntervalSet:
    shift = _as_int(shift, "shift")
    s = _coerce(s)
    return FreqIntervalSet(tuple(FreqInterval(p.lo + shift, p.hi + shift) for p in s))


def hull(s: FreqIntervalSet) -> FreqInterval:
    s = _coerce(s)
    if not s:
        raise ValueError("hull of an empty set is undefined")
    return FreqInterval(s.parts[0].lo, s.parts[-1].hi)


def union_normalized(a: FreqIntervalSet, b: FreqIntervalSet) -> FreqIntervalSet:
    return FreqIntervalSet.of(list(_coerce(a)) + list(_coerce(b)))


def intersection(a: FreqIntervalSet, b: FreqIntervalSet) -> FreqIntervalSet:
    """Set intersection; degenerate single-point overlaps are kept."""
    a, b = _coerce(a), _coerce(b)
    out = []
    i = j = 0
    pa, pb = a.parts, b.parts
    while i < len(pa) and j < len(pb):
        lo = max(pa[i].lo, pb[j].lo)
        hi = min(pa[i].hi, pb[j].hi)
        if lo <= hi:
            out.append(FreqInterval(lo, hi))
        if pa[i].hi < pb[j].hi:
            i += 1
        else:
            j += 1
    return FreqIntervalSet.of(out)


def _check_k(k) -> int:
    k = _as_int(k, "k")
    if k <= 0:
        raise ValueError(f"modulation frequency must be positive, got {k}")
    return k


def spectrum_pieces(q_prev_hull: FreqInterval, k: int) -> FreqIntervalSet:
    """``[k + 2Q] u [-k + 2Q]`` for the previous hull ``Q``.

    Touching pieces (possible only for inadmissible ``k``) merge into one
    interval under normalization.
    """
    k = _check_k(k)
    doubled = dilate(q_prev_hull, 2)
    return union_normalized(translate(doubled, k), translate(doubled, -k))


def next_hull(q_prev_hull: FreqInterval, k: int) -> FreqInterval:
    k = _check_k(k)
    pieces = spectrum_pieces(q_prev_hull, k)
    return hull(union_normalized(FreqIntervalSet((q_prev_hull,)), pieces))


def are_disjoint(a: FreqIntervalSet, b: FreqIntervalSet) -> bool:
    """True iff the closed sets share no point (a shared endpoint is an overlap)."""
    return not intersection(a, b)


def measure(s: FreqIntervalSet) -> int:
    return sum(p.length for p in _coerce(s))


def density(s: FreqIntervalSet, r: Number) -> Fraction:
    """Exact measure of ``s`` inside the open window ``(-r, r)``."""
    r = _as_exact(r, "R")
    if r <= 0:
        raise ValueError("R must be positive")
    total = Fraction(0)
    for p in _coerce(s):
        lo = max(Fraction(p.lo), -r)
        hi = min(Fraction(p.hi), r)
        if hi > lo:
            total += hi - lo
    return total


def density_profile(
    s: FreqIntervalSet, r_values: Sequence[Number]
) -> List[Tuple[Fraction, Fraction, Fraction]]:
    """Rows ``(R, h(R), h(R)/R)`` for ascending positive ``r_values``."""
    rs = [_as_exact(r, "R") for r in r_values]
    for a, b in zip(rs, rs[1:]):
        if not a < b:
            raise ValueError("r_values must be strictly ascending")
    rows = []
    for r in rs:
        h = density(s, r)
        rows.append((r, h, h / r))
    return rows
