"""Axis-aligned hyperrectangles ("boxes") with open/closed bounds.

Boxes are the geometric currency of the whole pipeline: the input domain,
violation ranges, search ranges, no-violation ranges and the pieces
produced by dividing a violation range are all boxes. Bounds carry an
explicit closed/open flag because the growth procedure creates half-open
search ranges (inner bound open, outer bound closed) and the division
step must partition a box without gaps or double cover.

Coordinates are exact rationals; only hypervolumes are computed in
double precision (they are used to rank alternatives and to report
sizes, never to decide membership).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Sequence

from .rational import format_fraction, to_fraction

Point = tuple[Fraction, ...]

Side = Literal["lower", "upper"]


@dataclass(frozen=True)
class Bound:
    """One endpoint of an interval; `closed` means the endpoint is included."""

    value: Fraction
    closed: bool


@dataclass(frozen=True)
class Interval:
    lower: Bound
    upper: Bound

    def is_empty(self) -> bool:
        if self.lower.value > self.upper.value:
            return True
        if self.lower.value == self.upper.value:
            return not (self.lower.closed and self.upper.closed)
        return False

    def width(self) -> Fraction:
        return self.upper.value - self.lower.value

    def contains(self, v: Fraction) -> bool:
        if v < self.lower.value or (v == self.lower.value and not self.lower.closed):
            return False
        if v > self.upper.value or (v == self.upper.value and not self.upper.closed):
            return False
        return True

    def contains_integer(self) -> bool:
        """Whether any integer satisfies the interval, honoring strictness."""
        lo, hi = self.lower, self.upper
        lo_int = lo.value.numerator + 1 if (not lo.closed and lo.value.denominator == 1) else math.ceil(lo.value)
        hi_int = hi.value.numerator - 1 if (not hi.closed and hi.value.denominator == 1) else math.floor(hi.value)
        return lo_int <= hi_int


@dataclass(frozen=True)
class Box:
    intervals: tuple[Interval, ...]

    @property
    def dims(self) -> int:
        return len(self.intervals)

    def is_empty(self, kinds: Sequence[str] | None = None) -> bool:
        """Empty as a set of admissible points.

        With `kinds` given (entries "real"/"integer"), an integer dimension
        whose interval contains no integer also makes the box empty.
        """
        for k, iv in enumerate(self.intervals):
            if iv.is_empty():
                return True
            if kinds is not None and kinds[k] == "integer" and not iv.contains_integer():
                return True
        return False

    def replace_interval(self, k: int, interval: Interval) -> "Box":
        parts = list(self.intervals)
        parts[k] = interval
        return Box(tuple(parts))


@dataclass(frozen=True)
class Plane:
    """An axis-aligned dividing plane x[dim] = value, tagged with the face
    of the source box it came from."""

    dim: int
    value: Fraction
    originating_side: Side


def closed_box(bounds: Iterable[tuple[Fraction | int | str, Fraction | int | str]]) -> Box:
    """Box with all bounds closed, from (lower, upper) pairs."""
    return Box(
        tuple(
            Interval(Bound(to_fraction(lo), True), Bound(to_fraction(hi), True))
            for lo, hi in bounds
        )
    )


def point_box(x: Sequence[Fraction]) -> Box:
    """Degenerate closed box [x, x]."""
    return Box(tuple(Interval(Bound(v, True), Bound(v, True)) for v in x))


def _require_same_dims(a: Box, b: Box) -> None:
    if a.dims != b.dims:
        raise ValueError(f"dimensionality mismatch: {a.dims} vs {b.dims}")


def _tighter_lower(a: Bound, b: Bound) -> Bound:
    if a.value != b.value:
        return a if a.value > b.value else b
    return Bound(a.value, a.closed and b.closed)


def _tighter_upper(a: Bound, b: Bound) -> Bound:
    if a.value != b.value:
        return a if a.value < b.value else b
    return Bound(a.value, a.closed and b.closed)


def intersection(a: Box, b: Box) -> Box:
    """Per-dimension intersection; on equal bound values the result is
    closed only when both inputs are closed. May be empty."""
    _require_same_dims(a, b)
    return Box(
        tuple(
            Interval(_tighter_lower(ia.lower, ib.lower), _tighter_upper(ia.upper, ib.upper))
            for ia, ib in zip(a.intervals, b.intervals)
        )
    )


def hypervolume(b: Box) -> float:
    """Product of side lengths in double precision; empty boxes give 0.

    Open/closed flags are ignored (the boundary has measure zero) and
    integer dimensions are measured as lengths, not point counts.
    """
    volume = 1.0
    for iv in b.intervals:
        width = float(iv.upper.value - iv.lower.value)
        if width <= 0.0:
            return 0.0
        volume *= width
    return volume


def contains(b: Box, x: Sequence[Fraction]) -> bool:
    """Strictness-respecting membership."""
    if len(x) != b.dims:
        raise ValueError(f"point has {len(x)} coordinates, box has {b.dims}")
    return all(iv.contains(v) for iv, v in zip(b.intervals, x))


def calc_planes(b: Box) -> tuple[Plane, ...]:
    """The 2s axis-aligned planes through the faces of a non-empty box."""
    if b.is_empty():
        raise ValueError("cannot take the dividing planes of an empty box")
    planes: list[Plane] = []
    for k, iv in enumerate(b.intervals):
        planes.append(Plane(k, iv.lower.value, "lower"))
        planes.append(Plane(k, iv.upper.value, "upper"))
    return tuple(planes)


def slice_box(b: Box, plane: Plane, anchor: Sequence[Fraction]) -> tuple[Box, Box]:
    """Partition `b` at x[plane.dim] = plane.value into (containing, other).

    The low side keeps the plane (closed upper bound), the high side
    excludes it (open lower bound), so the two pieces cover `b` exactly
    once. `containing` is the piece holding `anchor`; with the anchor on
    the plane the low side wins. Either piece may be empty when the plane
    does not cut the interior of `b`.
    """
    if len(anchor) != b.dims:
        raise ValueError(f"anchor has {len(anchor)} coordinates, box has {b.dims}")
    for iv, v in zip(b.intervals, anchor):
        if not (iv.lower.value <= v <= iv.upper.value):
            raise ValueError("anchor lies outside the box")
    k = plane.dim
    iv = b.intervals[k]
    low = b.replace_interval(k, Interval(iv.lower, _tighter_upper(iv.upper, Bound(plane.value, True))))
    high = b.replace_interval(k, Interval(_tighter_lower(iv.lower, Bound(plane.value, False)), iv.upper))
    if anchor[k] <= plane.value:
        return low, high
    return high, low


def box_to_json(b: Box) -> dict:
    """Schema fragment used by the violation-range file."""
    return {
        "dims": [
            {
                "lower": format_fraction(iv.lower.value),
                "lower_closed": iv.lower.closed,
                "upper": format_fraction(iv.upper.value),
                "upper_closed": iv.upper.closed,
            }
            for iv in b.intervals
        ]
    }


def box_from_json(data: dict) -> Box:
    try:
        dims = data["dims"]
        return Box(
            tuple(
                Interval(
                    Bound(to_fraction(d["lower"]), bool(d["lower_closed"])),
                    Bound(to_fraction(d["upper"]), bool(d["upper_closed"])),
                )
                for d in dims
            )
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed box record: {exc}") from exc
