"""The outer detection loop and the runtime input filter.

Repeatedly: ask the solver for a violating input under the running
constraints; grow a violation range around it; while the range is still
large relative to the domain and no-violation ranges remain, divide it
(popping the most recently found no-violation range first) and keep the
outer pieces that still contain violations; then exclude the full
pre-division range from further search. The loop ends when no violating
input remains, at which point the union of the emitted ranges contains
every violating input of the domain.

If the time budget runs out or the solver answers unknown, the ranges
accumulated so far (including the partially grown one) are returned with
a non-complete status; they still only ever over-approximate the regions
they were grown from, so partial output remains usable as a filter seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .division import DivisionAborted, continue_division, range_division
from .extraction import ExtractionAborted, range_extraction
from .geometry import Box, box_to_json, contains, hypervolume
from .model import Ensemble
from .properties import Property, bind_property
from .rational import format_fraction, to_fraction
from .smt import (
    BudgetExhaustedError,
    ConstraintSet,
    Sat,
    Solver,
    SolverConfig,
    Unknown,
    Unsat,
)

STATUS_COMPLETE = "complete"
STATUS_ABORTED_BUDGET = "aborted_budget"
STATUS_ABORTED_UNKNOWN = "aborted_unknown"


@dataclass(frozen=True)
class Parameters:
    """Tuning knobs of the detection loop.

    r_a sets the probe resolution (domain width / r_a per dimension),
    r_b the volume percentage of the domain below which a range is not
    divided further, and r_c how many dividing orders are tried. Smaller
    r_a, larger r_b or smaller r_c all reduce solver calls at the price
    of coarser ranges.
    """

    r_a: Fraction | int | str = 100
    r_b: float = 10.0
    r_c: int = 10
    per_call_timeout: float = 60.0
    total_budget: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if to_fraction(self.r_a) <= 0:
            raise ValueError(f"r_a must be positive, got {self.r_a}")
        if not 0.0 <= float(self.r_b) <= 100.0:
            raise ValueError(f"r_b must be a percentage in [0, 100], got {self.r_b}")
        if self.r_c < 1:
            raise ValueError(f"r_c must be at least 1, got {self.r_c}")
        if self.total_budget is not None and self.total_budget < 0:
            raise ValueError("total_budget must be non-negative")


@dataclass(frozen=True)
class Totals:
    wall_time: float
    solver_time: float
    solver_calls: int
    avg_solver_call_time: float


@dataclass
class DetectionReport:
    vranges: list[Box]
    per_range_volume: list[float]
    totals: Totals
    status: str
    excluded_vios: list[Box] = field(default_factory=list)


def _abort_status(reason: str) -> str:
    return STATUS_ABORTED_BUDGET if reason == "budget" else STATUS_ABORTED_UNKNOWN


def _mix_seed(seed: int, outer: int, division_round: int) -> int:
    return (seed << 32) ^ (outer << 16) ^ division_round


def detect_violation_ranges(
    m: Ensemble,
    phi: Property,
    X: Box,
    params: Parameters = Parameters(),
    *,
    solver: Solver | None = None,
    solver_config: SolverConfig | None = None,
) -> DetectionReport:
    """Run the full detection loop and report the violation ranges.

    A caller-supplied Solver is reused (its statistics are read as deltas);
    otherwise a solver is built from `solver_config`, with the per-call
    timeout taken from `params`.
    """
    bind_property(phi, m.n_features)
    kinds = m.kinds
    if X.dims != m.n_features:
        raise ValueError("domain dimensionality does not match the model")
    if X.is_empty(kinds):
        raise ValueError("domain box is empty")

    own_solver = solver is None
    if own_solver:
        config = solver_config or SolverConfig(timeout=params.per_call_timeout)
        solver = Solver(config)

    calls_before = solver.calls
    time_before = solver.solver_time
    started = time.monotonic()
    solver.deadline = started + params.total_budget if params.total_budget is not None else None

    vranges: list[Box] = []
    excluded: list[Box] = []
    status = STATUS_COMPLETE
    rho = ConstraintSet(domain=X)
    outer = 0
    try:
        while True:
            try:
                result = solver.check(m, phi, rho)
            except BudgetExhaustedError:
                status = STATUS_ABORTED_BUDGET
                break
            if isinstance(result, Unknown):
                status = _abort_status(result.reason)
                break
            if isinstance(result, Unsat):
                break
            assert isinstance(result, Sat)
            ce = result.x

            try:
                extracted = range_extraction(ce, m, phi, rho, params.r_a, X, solver)
            except ExtractionAborted as aborted:
                vranges.append(aborted.vio)
                status = _abort_status(aborted.reason)
                break

            vio = extracted.vio
            novios = list(extracted.novios)
            core = vio
            division_round = 0
            abort_reason: str | None = None
            while continue_division(core, X, params.r_b) and novios:
                no_violation = novios.pop()
                try:
                    outcome = range_division(
                        core,
                        no_violation,
                        rho,
                        params.r_c,
                        m,
                        phi,
                        ce,
                        _mix_seed(params.seed, outer, division_round),
                        solver,
                    )
                except DivisionAborted as aborted:
                    abort_reason = aborted.reason
                    break
                core = outcome.core
                vranges.extend(outcome.surrds)
                division_round += 1

            vranges.append(core)
            if abort_reason is not None:
                status = _abort_status(abort_reason)
                break
            excluded.append(vio)
            rho = rho.excluding(vio)
            outer += 1
    finally:
        solver.deadline = None
        wall_time = time.monotonic() - started
        solver_calls = solver.calls - calls_before
        solver_time = solver.solver_time - time_before
        if own_solver:
            solver.close()

    totals = Totals(
        wall_time=wall_time,
        solver_time=solver_time,
        solver_calls=solver_calls,
        avg_solver_call_time=solver_time / solver_calls if solver_calls else 0.0,
    )
    return DetectionReport(
        vranges=vranges,
        per_range_volume=[hypervolume(b) for b in vranges],
        totals=totals,
        status=status,
        excluded_vios=excluded,
    )


def filter_check(vranges: Sequence[Box], x: Sequence[Fraction]) -> bool:
    """True when the point falls in any violation range, meaning the input
    should be routed to fallback handling instead of the model."""
    return any(contains(b, x) for b in vranges)


def report_to_dict(report: DetectionReport) -> dict:
    return {
        "status": report.status,
        "vranges": [box_to_json(b) for b in report.vranges],
        "per_range_volume": report.per_range_volume,
        "excluded_vios": [box_to_json(b) for b in report.excluded_vios],
        "totals": {
            "wall_time": report.totals.wall_time,
            "solver_time": report.totals.solver_time,
            "solver_calls": report.totals.solver_calls,
            "avg_solver_call_time": report.totals.avg_solver_call_time,
        },
    }


def _format_interval(iv, name: str) -> str:
    left = "<=" if iv.lower.closed else "<"
    right = "<=" if iv.upper.closed else "<"
    return f"{format_fraction(iv.lower.value)} {left} {name} {right} {format_fraction(iv.upper.value)}"


def format_report_table(report: DetectionReport, feature_names: Sequence[str] | None = None) -> str:
    """Human-readable summary: one row per emitted range, then totals."""
    lines: list[str] = []
    if not report.vranges:
        lines.append("No violation range detected.")
    for i, (box, volume) in enumerate(zip(report.vranges, report.per_range_volume), start=1):
        bounds = ", ".join(
            _format_interval(iv, feature_names[k] if feature_names else f"x[{k}]")
            for k, iv in enumerate(box.intervals)
        )
        lines.append(f"#{i}: {bounds}  |  hypervolume {volume:.3g}")
    before = sum(hypervolume(b) for b in report.excluded_vios)
    after = sum(report.per_range_volume)
    if before > 0:
        lines.append(f"volume after division / before division: {after / before:.3g}")
    totals = report.totals
    lines.append(
        f"status: {report.status}  |  wall {totals.wall_time:.2f}s  |  solver {totals.solver_time:.2f}s"
        f"  |  calls {totals.solver_calls}  |  avg {totals.avg_solver_call_time:.3g}s/call"
    )
    return "\n".join(lines)
