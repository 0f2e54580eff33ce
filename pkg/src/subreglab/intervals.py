"""Finite unions of closed real intervals and exact distance computations.

These are the value type of every set-valued map in the package.  Endpoints
may be ``-inf``/``+inf`` (explicit sentinels, never large floats), so
membership and distances are exact.  The distance to the empty set is +inf
by convention, which lets estimators filter empty values cleanly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import EmptySetError

INF = math.inf


@dataclass(frozen=True, order=True)
class ClosedInterval:
    """A closed interval [lo, hi]; lo = hi is a singleton."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"invalid interval: lo={lo!r} > hi={hi!r}")
        if lo == INF or hi == -INF:
            raise ValueError("interval endpoints may be infinite only on the unbounded side")

    @property
    def is_singleton(self) -> bool:
        return self.lo == self.hi

    @property
    def is_bounded(self) -> bool:
        return self.lo > -INF and self.hi < INF

    def contains(self, p: float) -> bool:
        return self.lo <= p <= self.hi

    def distance_to(self, p: float) -> float:
        return max(self.lo - p, p - self.hi, 0.0)

    def nearest_to(self, p: float) -> float:
        return min(max(p, self.lo), self.hi)

    def shift(self, t: float) -> "ClosedInterval":
        return ClosedInterval(self.lo + t, self.hi + t)

    def negate(self) -> "ClosedInterval":
        return ClosedInterval(-self.hi, -self.lo)

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


FULL_LINE = ClosedInterval(-INF, INF)


class IntervalUnion:
    """Canonical finite disjoint union of closed intervals.

    ``parts`` is sorted by lower endpoint with strict gaps between parts
    (touching intervals are merged).  An empty tuple is the empty set.
    Instances are immutable; construct through :func:`normalize` or the
    ``singleton``/``of`` helpers unless the parts are already canonical.
    """

    __slots__ = ("parts",)

    def __init__(self, parts: tuple[ClosedInterval, ...] = (), *, _trusted: bool = False):
        if not _trusted:
            parts = _normalize_parts(parts)
        object.__setattr__(self, "parts", parts)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("IntervalUnion is immutable")

    @staticmethod
    def empty() -> "IntervalUnion":
        return _EMPTY

    @staticmethod
    def singleton(v: float) -> "IntervalUnion":
        return IntervalUnion((ClosedInterval(v, v),), _trusted=True)

    @staticmethod
    def of(lo: float, hi: float) -> "IntervalUnion":
        return IntervalUnion((ClosedInterval(lo, hi),), _trusted=True)

    @staticmethod
    def whole_line() -> "IntervalUnion":
        return IntervalUnion((FULL_LINE,), _trusted=True)

    @property
    def is_empty(self) -> bool:
        return not self.parts

    def contains(self, p: float) -> bool:
        return any(part.contains(p) for part in self.parts)

    def distance(self, p: float) -> float:
        """Distance from ``p`` to the set; +inf when empty, 0 iff member."""
        best = INF
        for part in self.parts:
            d = part.distance_to(p)
            if d < best:
                best = d
                if best == 0.0:
                    break
        return best

    def nearest_point(self, p: float) -> float:
        """A member attaining ``distance(p)``; ties break toward the smaller value."""
        if not self.parts:
            raise EmptySetError("nearest_point of the empty set")
        best_v = self.parts[0].nearest_to(p)
        best_d = self.parts[0].distance_to(p)
        for part in self.parts[1:]:
            d = part.distance_to(p)
            if d < best_d:  # parts are ordered, so '<' keeps the smaller candidate on ties
                best_d = d
                best_v = part.nearest_to(p)
        return best_v

    def shift(self, t: float) -> "IntervalUnion":
        if t == 0.0 or not self.parts:
            return self
        return IntervalUnion(tuple(part.shift(t) for part in self.parts), _trusted=True)

    def negate(self) -> "IntervalUnion":
        if not self.parts:
            return self
        return IntervalUnion(tuple(p.negate() for p in reversed(self.parts)), _trusted=True)

    def endpoints(self) -> list[float]:
        """Finite endpoints of all parts, in increasing order."""
        out: list[float] = []
        for part in self.parts:
            for v in (part.lo, part.hi):
                if math.isfinite(v) and (not out or out[-1] != v):
                    out.append(v)
        return out

    def __iter__(self) -> Iterator[ClosedInterval]:
        return iter(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return self.parts == other.parts

    def __hash__(self) -> int:
        return hash(self.parts)

    def __repr__(self) -> str:
        if not self.parts:
            return "IntervalUnion(empty)"
        return "IntervalUnion(" + " ∪ ".join(repr(p) for p in self.parts) + ")"


_EMPTY = IntervalUnion((), _trusted=True)


def _coerce(item) -> ClosedInterval:
    if isinstance(item, ClosedInterval):
        return item
    lo, hi = item
    return ClosedInterval(lo, hi)


def _normalize_parts(raw: Iterable) -> tuple[ClosedInterval, ...]:
    items = sorted((_coerce(r) for r in raw), key=lambda c: (c.lo, c.hi))
    if not items:
        return ()
    merged = [items[0]]
    for cur in items[1:]:
        last = merged[-1]
        if cur.lo <= last.hi:  # overlap or touch: merge
            if cur.hi > last.hi:
                merged[-1] = ClosedInterval(last.lo, cur.hi)
        else:
            merged.append(cur)
    return tuple(merged)


def normalize(raw: Iterable) -> IntervalUnion:
    """Canonical sorted, merged, disjoint union of the given intervals.

    Accepts :class:`ClosedInterval` instances or ``(lo, hi)`` pairs and
    rejects any pair with ``lo > hi``.
    """
    return IntervalUnion(_normalize_parts(raw), _trusted=True)


def distance(p: float, s: IntervalUnion) -> float:
    return s.distance(p)


def nearest_point(p: float, s: IntervalUnion) -> float:
    return s.nearest_point(p)
