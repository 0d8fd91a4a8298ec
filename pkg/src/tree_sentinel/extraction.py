"""Growing a violation range around a counterexample.

Starting from the degenerate box [ce, ce], the range is extended one axis
bound at a time: for each dimension, first the upper then the lower
direction, sweeping dimensions round-robin until a full sweep makes no
progress. Each attempt probes a search range adjacent to the current
violation range (inner bound open so the already-covered boundary is not
re-examined, outer bound closed) of width given by the margin function,
clipped to the domain. A probe that still contains a violating input
moves the bound outward; a clean probe is remembered as a tentative
no-violation range and becomes final if the same direction later expands
past it. The stack of finalized no-violation ranges feeds the division
step.

Probe width per dimension is the domain width divided by the resolution
parameter, rounded up to an integer for integer-kind features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .geometry import Bound, Box, Interval, Point, contains, intersection, point_box
from .model import Ensemble
from .properties import Property
from .rational import to_fraction
from .smt import BudgetExhaustedError, ConstraintSet, Sat, Solver, Unknown, Unsat

UPPER = "upper"
LOWER = "lower"


@dataclass(frozen=True)
class Margin:
    """Per-dimension probe step; every step is positive."""

    steps: tuple[Fraction, ...]


def mgn(r_a: Fraction | int | str, domain: Box, kinds: Sequence[str]) -> Margin:
    """Probe steps from the domain widths: width/r_a per real dimension,
    ceil(width/r_a) per integer dimension."""
    ratio = to_fraction(r_a)
    if ratio <= 0:
        raise ValueError(f"r_a must be positive, got {r_a}")
    steps: list[Fraction] = []
    for k, iv in enumerate(domain.intervals):
        width = iv.upper.value - iv.lower.value
        step = Fraction(math.ceil(width / ratio)) if kinds[k] == "integer" else width / ratio
        if step <= 0:
            raise ValueError(f"dimension {k} of the domain is degenerate (width {width}); margin step would be 0")
        steps.append(step)
    return Margin(tuple(steps))


class ExtractionAborted(Exception):
    """The solver stopped answering (unknown/timeout) or the budget ran
    out mid-extraction; carries the partial result grown so far."""

    def __init__(self, vio: Box, novios: tuple[Box, ...], reason: str):
        super().__init__(f"extraction aborted: {reason}")
        self.vio = vio
        self.novios = novios
        self.reason = reason


@dataclass(frozen=True)
class ExtractionResult:
    vio: Box
    novios: tuple[Box, ...]  # push order; the last element is the outermost


@dataclass
class ExtractionState:
    vio: Box
    tmp_nv: dict[tuple[str, int], Box | None]
    novios: list[Box]


def _search_range(vio: Box, direction: str, k: int, step: Fraction) -> Box:
    """The probe box adjacent to vio along dimension k: open where it
    touches vio, closed on the outer side; other dimensions unchanged."""
    iv = vio.intervals[k]
    if direction == UPPER:
        inner = iv.upper.value
        probe = Interval(Bound(inner, False), Bound(inner + step, True))
    else:
        inner = iv.lower.value
        probe = Interval(Bound(inner - step, True), Bound(inner, False))
    return vio.replace_interval(k, probe)


def expand(
    state: ExtractionState,
    direction: str,
    k: int,
    margin: Margin,
    m: Ensemble,
    phi: Property,
    rho: ConstraintSet,
    X: Box,
    solver: Solver,
) -> bool:
    """Try to extend one bound of the violation range.

    Returns True when the bound moved. A probe clipped to nothing by the
    domain returns False without a solver call; this is what terminates
    the sweep at the domain boundary. A clean (unsat) probe is stored as
    the tentative no-violation range for this direction, replacing any
    earlier one; the tentative range is pushed to the novios stack only
    when a later probe in the same direction finds violations beyond it.
    """
    kinds = m.kinds
    sr = _search_range(state.vio, direction, k, margin.steps[k])
    sr = intersection(X, sr)
    if sr.is_empty(kinds):
        return False
    try:
        result = solver.check(m, phi, rho.with_confinement(sr))
    except BudgetExhaustedError:
        raise ExtractionAborted(state.vio, tuple(state.novios), "budget") from None
    if isinstance(result, Unknown):
        raise ExtractionAborted(state.vio, tuple(state.novios), result.reason)
    if isinstance(result, Sat):
        iv = sr.intervals[k]
        moved = Bound(iv.upper.value if direction == UPPER else iv.lower.value, True)
        vio_iv = state.vio.intervals[k]
        new_iv = Interval(vio_iv.lower, moved) if direction == UPPER else Interval(moved, vio_iv.upper)
        state.vio = state.vio.replace_interval(k, new_iv)
        pending = state.tmp_nv.get((direction, k))
        if pending is not None:
            state.novios.append(pending)
            state.tmp_nv[(direction, k)] = None
        return True
    assert isinstance(result, Unsat)
    state.tmp_nv[(direction, k)] = sr
    return False


def range_extraction(
    ce: Point,
    m: Ensemble,
    phi: Property,
    rho: ConstraintSet,
    r_a: Fraction | int | str,
    X: Box,
    solver: Solver,
) -> ExtractionResult:
    """Grow the violation range around a counterexample.

    The counterexample must already be known to violate the property and
    to lie inside the domain. The returned violation range always contains
    it, is contained in the domain, and only ever grows while extending.
    """
    if not contains(X, ce):
        raise ValueError("counterexample lies outside the domain")
    margin = mgn(r_a, X, m.kinds)
    s = m.n_features
    state = ExtractionState(
        vio=point_box(ce),
        tmp_nv={(d, k): None for d in (LOWER, UPPER) for k in range(s)},
        novios=[],
    )
    cont = True
    while cont:
        cont = False
        for k in range(s):
            grew_upper = expand(state, UPPER, k, margin, m, phi, rho, X, solver)
            grew_lower = expand(state, LOWER, k, margin, m, phi, rho, X, solver)
            if grew_upper or grew_lower:
                cont = True
    return ExtractionResult(state.vio, tuple(state.novios))
