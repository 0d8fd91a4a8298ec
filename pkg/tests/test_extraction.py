import math
from fractions import Fraction

import pytest

from tree_sentinel.extraction import (
    LOWER,
    UPPER,
    ExtractionState,
    Margin,
    expand,
    mgn,
    range_extraction,
)
from tree_sentinel.geometry import Box, closed_box, contains, intersection, point_box
from tree_sentinel.oracle import GridSpec, brute_force_violations
from tree_sentinel.properties import parse_property
from tree_sentinel.smt import ConstraintSet, Unsat

from helpers import feat, interval_model_1d, l_shape_model_2d, leaf, make, model_doc, split

F = Fraction


class TestMgn:
    def test_real_dim(self):
        domain = closed_box([(0, 200)])
        assert mgn(100, domain, ("real",)).steps == (F(2),)

    def test_integer_dim_rounds_up(self):
        domain = closed_box([(0, 150)])
        assert mgn(100, domain, ("integer",)).steps == (F(2),)

    def test_integer_dim_never_below_one(self):
        domain = closed_box([(0, 50)])
        assert mgn(100, domain, ("integer",)).steps == (F(1),)

    def test_nonpositive_ratio_rejected(self):
        domain = closed_box([(0, 10)])
        with pytest.raises(ValueError, match="r_a"):
            mgn(0, domain, ("real",))
        with pytest.raises(ValueError, match="r_a"):
            mgn(-3, domain, ("real",))

    def test_degenerate_dim_rejected(self):
        domain = closed_box([(5, 5)])
        with pytest.raises(ValueError, match="degenerate"):
            mgn(100, domain, ("real",))

    def test_mixed_kinds(self):
        domain = closed_box([(0, 150), (0, 150)])
        margin = mgn(100, domain, ("integer", "real"))
        assert margin.steps == (F(2), F(3, 2))


def fresh_state(vio: Box, s: int) -> ExtractionState:
    return ExtractionState(
        vio=vio,
        tmp_nv={(d, k): None for d in (LOWER, UPPER) for k in range(s)},
        novios=[],
    )


@pytest.fixture
def block_model():
    """1-D integer model violating 'y > 0' exactly on {0, 1, 2, 3}."""
    m = interval_model_1d(0, 3)
    phi = parse_property("y > 0")
    X = closed_box([(0, 10)])
    violations = brute_force_violations(m, phi, GridSpec.from_box(X, m.kinds))
    assert violations == {(0,), (1,), (2,), (3,)}
    return m, phi, X


class TestExpand:
    def test_sat_probe_moves_bound(self, block_model, solver):
        m, phi, X = block_model
        rho = ConstraintSet(domain=X)
        state = fresh_state(closed_box([(1, 1)]), 1)
        moved = expand(state, UPPER, 0, Margin((F(1),)), m, phi, rho, X, solver)
        assert moved is True
        assert state.vio == closed_box([(1, 2)])

    def test_unsat_probe_stores_tentative(self, block_model, solver):
        m, phi, X = block_model
        rho = ConstraintSet(domain=X)
        state = fresh_state(closed_box([(0, 3)]), 1)
        moved = expand(state, UPPER, 0, Margin((F(1),)), m, phi, rho, X, solver)
        assert moved is False
        assert state.vio == closed_box([(0, 3)])
        sr = state.tmp_nv[(UPPER, 0)]
        assert sr is not None
        assert sr.intervals[0].lower == sr.intervals[0].lower.__class__(F(3), False)
        assert sr.intervals[0].upper.value == F(4) and sr.intervals[0].upper.closed

    def test_probe_at_domain_edge_skips_solver(self, block_model, solver):
        m, phi, X = block_model
        rho = ConstraintSet(domain=X)
        state = fresh_state(closed_box([(8, 10)]), 1)
        calls_before = solver.calls
        moved = expand(state, UPPER, 0, Margin((F(1),)), m, phi, rho, X, solver)
        assert moved is False
        assert solver.calls == calls_before

    def test_tentative_promoted_on_later_expansion(self, solver):
        # 2-D L-shaped violating region: a clean probe in the x0 direction
        # becomes a no-violation range once the x1 direction grows far
        # enough that the next x0 probe finds violations again.
        #   violations: {0,1} x {0..4}  union  {2,3} x {3,4}
        m = l_shape_model_2d()
        phi = parse_property("y > 0")
        X = closed_box([(0, 10), (0, 10)])
        expected = {(a, b) for a in (0, 1) for b in range(5)} | {(a, b) for a in (2, 3) for b in (3, 4)}
        assert brute_force_violations(m, phi, GridSpec.from_box(X, m.kinds)) == expected

        rho = ConstraintSet(domain=X)
        margin = Margin((F(1), F(1)))
        state = fresh_state(closed_box([(0, 1), (0, 2)]), 2)
        # Probe x0 upward at height 2: clean, stored as tentative.
        assert expand(state, UPPER, 0, margin, m, phi, rho, X, solver) is False
        tentative = state.tmp_nv[(UPPER, 0)]
        assert tentative is not None
        # Grow x1, then the same x0 probe (now taller) hits the notch.
        assert expand(state, UPPER, 1, margin, m, phi, rho, X, solver) is True
        assert expand(state, UPPER, 0, margin, m, phi, rho, X, solver) is True
        assert state.novios == [tentative]
        assert state.tmp_nv[(UPPER, 0)] is None

    def test_full_extraction_covers_l_shape(self, solver):
        m = l_shape_model_2d()
        phi = parse_property("y > 0")
        X = closed_box([(0, 10), (0, 10)])
        rho = ConstraintSet(domain=X)
        result = range_extraction((F(0), F(0)), m, phi, rho, 10, X, solver)
        violations = brute_force_violations(m, phi, GridSpec.from_box(X, m.kinds))
        assert all(contains(result.vio, (F(a), F(b))) for a, b in violations)
        assert len(result.novios) >= 1


class TestRangeExtraction:
    def test_block_model_exact_range(self, block_model, solver):
        m, phi, X = block_model
        rho = ConstraintSet(domain=X)
        result = range_extraction((F(1),), m, phi, rho, 10, X, solver)
        assert result.vio == closed_box([(0, 3)])
        violations = brute_force_violations(m, phi, GridSpec.from_box(X, m.kinds))
        assert all(contains(result.vio, (F(v[0]),)) for v in violations)

    def test_everywhere_violating_fills_domain(self, solver):
        tree = {"root": 0, "nodes": [split(0, 0, 5, 1, 2), leaf(1, -1), leaf(2, -1)]}
        m = make(model_doc(feat(1), [tree]))
        phi = parse_property("y > 0")
        X = closed_box([(0, 10)])
        rho = ConstraintSet(domain=X)
        result = range_extraction((F(4),), m, phi, rho, 10, X, solver)
        assert result.vio == X
        assert result.novios == ()

    def test_isolated_point_stays_degenerate(self, solver):
        m = interval_model_1d(5, 5)
        phi = parse_property("y > 0")
        X = closed_box([(0, 10)])
        rho = ConstraintSet(domain=X)
        result = range_extraction((F(5),), m, phi, rho, 10, X, solver)
        assert result.vio == point_box((F(5),))
        assert len(result.novios) <= 2 * 1

    def test_ce_outside_domain_rejected(self, block_model, solver):
        m, phi, X = block_model
        with pytest.raises(ValueError, match="outside the domain"):
            range_extraction((F(99),), m, phi, ConstraintSet(domain=X), 10, X, solver)

    def test_monotone_growth(self, block_model, solver):
        m, phi, X = block_model
        rho = ConstraintSet(domain=X)
        state = fresh_state(point_box((F(1),)), 1)
        margin = mgn(10, X, m.kinds)
        previous = state.vio
        for _ in range(6):
            for direction in (UPPER, LOWER):
                expand(state, direction, 0, margin, m, phi, rho, X, solver)
                assert intersection(previous, state.vio) == previous  # grew or stayed
                previous = state.vio

    def test_invariants_on_corpus(self, oracle_corpus, solver):
        """ce stays inside, the range stays inside the domain, the call count
        respects the sweep bound, and pushed no-violation ranges re-verify."""
        checked = 0
        for m, X, _, phi in oracle_corpus:
            if checked >= 12:
                break
            rho = ConstraintSet(domain=X)
            from tree_sentinel.smt import Sat

            seed_result = solver.check(m, phi, rho)
            if not isinstance(seed_result, Sat):
                continue
            checked += 1
            ce = seed_result.x
            calls_before = solver.calls
            result = range_extraction(ce, m, phi, rho, 4, X, solver)
            calls = solver.calls - calls_before
            assert contains(result.vio, ce)
            assert intersection(result.vio, X) == result.vio  # vio inside X
            margin = mgn(4, X, m.kinds)
            s = m.n_features
            bound = 2 * s * (
                sum(math.ceil((iv.upper.value - iv.lower.value) / step) for iv, step in zip(X.intervals, margin.steps))
                + s
                + 1
            )
            assert calls <= bound
            for novio in result.novios:
                recheck = solver.check(m, phi, rho.with_confinement(novio))
                assert isinstance(recheck, Unsat)
        assert checked >= 5
