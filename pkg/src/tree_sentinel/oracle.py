"""Brute-force ground truth over small all-integer domains.

Enumerates every grid point of the domain and evaluates the model and the
property with the same exact-rational code the verifier uses, so any
disagreement with the solver pinpoints a bug in exactly one of the two
paths. Only integer-kind features are supported: real dimensions would
need sampling, which cannot certify completeness.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .geometry import Box, contains
from .model import Ensemble, predict
from .properties import Property, evaluate_property

DEFAULT_GRID_CAP = 10_000_000

IntPoint = tuple[int, ...]


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Inclusive per-dimension integer ranges."""

    ranges: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        total = 1
        for lo, hi in self.ranges:
            total *= max(0, hi - lo + 1)
        return total

    @classmethod
    def from_box(cls, X: Box, kinds: Sequence[str], cap: int = DEFAULT_GRID_CAP) -> "GridSpec":
        non_integer = [k for k, kind in enumerate(kinds) if kind != "integer"]
        if non_integer:
            raise OracleError(f"brute force needs all-integer features; dims {non_integer} are real")
        ranges: list[tuple[int, int]] = []
        for iv in X.intervals:
            lo = iv.lower.value.numerator + 1 if (not iv.lower.closed and iv.lower.value.denominator == 1) else math.ceil(iv.lower.value)
            hi = iv.upper.value.numerator - 1 if (not iv.upper.closed and iv.upper.value.denominator == 1) else math.floor(iv.upper.value)
            ranges.append((lo, hi))
        grid = cls(tuple(ranges))
        if grid.size > cap:
            raise OracleError(f"grid has {grid.size} points, exceeding the cap of {cap}")
        return grid

    def points(self):
        return itertools.product(*(range(lo, hi + 1) for lo, hi in self.ranges))


def brute_force_violations(m: Ensemble, phi: Property, grid: GridSpec) -> set[IntPoint]:
    """The exact set of grid points whose model output violates the property."""
    if len(grid.ranges) != m.n_features:
        raise OracleError("grid dimensionality does not match the model")
    violations: set[IntPoint] = set()
    for raw in grid.points():
        x = tuple(Fraction(v) for v in raw)
        if not evaluate_property(phi, x, predict(m, x)):
            violations.add(raw)
    return violations


@dataclass(frozen=True)
class CoverageReport:
    total_violations: int
    uncovered: tuple[IntPoint, ...]

    @property
    def passed(self) -> bool:
        return not self.uncovered


def coverage_check(vranges: Sequence[Box], violations: set[IntPoint]) -> CoverageReport:
    """List violating points that no violation range covers; empty = pass."""
    uncovered = tuple(
        sorted(
            p
            for p in violations
            if not any(contains(b, tuple(Fraction(v) for v in p)) for b in vranges)
        )
    )
    return CoverageReport(total_violations=len(violations), uncovered=uncovered)
