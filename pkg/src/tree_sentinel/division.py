"""Narrowing a violation range by dividing it along a no-violation range.

The dividing planes are the 2s faces of the no-violation range. Applying
them in some order repeatedly slices the working core; the piece holding
the original counterexample stays the core, and each outer piece is kept
only if the solver still finds a violating input inside it. Because the
outcome depends on the plane order, several randomly sampled orders are
tried and the one with the smallest total hypervolume (core plus kept
outer pieces) wins; the first trial wins ties, so a fixed seed gives a
fixed result.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from .geometry import Box, Point, calc_planes, contains, hypervolume, slice_box
from .model import Ensemble
from .properties import Property
from .smt import BudgetExhaustedError, ConstraintSet, Sat, Solver, Unknown, Unsat


class DivisionAborted(Exception):
    def __init__(self, reason: str):
        super().__init__(f"division aborted: {reason}")
        self.reason = reason


@dataclass(frozen=True)
class DivisionOutcome:
    core: Box
    surrds: tuple[Box, ...]
    total_volume: float


def continue_division(core: Box, X: Box, r_b: float) -> bool:
    """Keep dividing while the core is at least r_b percent of the domain."""
    domain_volume = hypervolume(X)
    if domain_volume == 0.0:
        raise ValueError("domain has zero hypervolume; the ratio test is undefined")
    return hypervolume(core) >= (r_b / 100.0) * domain_volume


def calc_volume_sum(core: Box, surrds: Sequence[Box]) -> float:
    return hypervolume(core) + sum(hypervolume(b) for b in surrds)


def sample_orders(n_planes: int, r_c: int, rng: random.Random) -> list[tuple[int, ...]]:
    """Distinct plane orders via seeded shuffles; when fewer than r_c
    permutations exist, all of them are produced."""
    wanted = min(r_c, math.factorial(n_planes))
    orders: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    while len(orders) < wanted:
        order = list(range(n_planes))
        rng.shuffle(order)
        key = tuple(order)
        if key not in seen:
            seen.add(key)
            orders.append(key)
    return orders


def range_division(
    core: Box,
    iv: Box,
    rho: ConstraintSet,
    r_c: int,
    m: Ensemble,
    phi: Property,
    ce: Point,
    seed,
    solver: Solver,
) -> DivisionOutcome:
    """Divide the core along the faces of a no-violation range.

    For each sampled order the working core is reset to the input core and
    sliced plane by plane, keeping the counterexample's side; every
    non-empty off-side piece is kept only when the solver finds a
    violating input in it. Pieces the planes cannot cut (empty off-side)
    are skipped without a solver call. The minimum-total-volume result is
    returned, so the outcome never has more volume than the input core.
    """
    if r_c < 1:
        raise ValueError(f"r_c must be at least 1, got {r_c}")
    if not contains(core, ce):
        raise ValueError("counterexample lies outside the core")
    kinds = m.kinds
    planes = calc_planes(iv)
    rng = random.Random(seed)
    orders = sample_orders(len(planes), r_c, rng)

    best: DivisionOutcome | None = None
    for order in orders:
        working = core
        surrds: list[Box] = []
        for index in order:
            working, other = slice_box(working, planes[index], ce)
            if other.is_empty(kinds):
                continue
            try:
                result = solver.check(m, phi, rho.with_confinement(other))
            except BudgetExhaustedError:
                raise DivisionAborted("budget") from None
            if isinstance(result, Unknown):
                raise DivisionAborted(result.reason)
            if isinstance(result, Sat):
                surrds.append(other)
            else:
                assert isinstance(result, Unsat)
        volume = calc_volume_sum(working, surrds)
        if best is None or volume < best.total_volume:
            best = DivisionOutcome(working, tuple(surrds), volume)
    assert best is not None
    return best
