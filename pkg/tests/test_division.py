import random
from fractions import Fraction

import pytest

from tree_sentinel.division import (
    calc_volume_sum,
    continue_division,
    range_division,
    sample_orders,
)
from tree_sentinel.extraction import range_extraction
from tree_sentinel.geometry import (
    closed_box,
    contains,
    hypervolume,
    intersection,
)
from tree_sentinel.oracle import GridSpec, brute_force_violations
from tree_sentinel.properties import parse_property
from tree_sentinel.smt import ConstraintSet, Sat, Unsat

from helpers import hole_model_2d, l_shape_model_2d, step_model

F = Fraction

# Published violation ranges: the one before division and the five after.
RANGE_BEFORE = closed_box([(6977, 13540), (0, 33), (520, 1651359), (1, 4), (1, 9), (290, 9410), (0, 4820)])
RANGES_AFTER = [
    closed_box([(6977, 13540), (0, 33), (520, 1651359), (3, 4), (1, 9), (6542, 9410), (0, 4820)]),
    closed_box([(6977, 7110), (0, 33), (520, 1651359), (1, 3), (1, 9), (6542, 9410), (0, 4820)]),
    closed_box([(7110, 13540), (0, 33), (520, 1651359), (1, 3), (1, 9), (290, 9410), (2459, 4820)]),
    closed_box([(7110, 13540), (0, 33), (520, 1651359), (1, 3), (8, 9), (5990, 9410), (0, 2459)]),
    closed_box([(7110, 13540), (0, 33), (520, 1651359), (1, 3), (1, 8), (290, 9410), (0, 2459)]),
]


class TestContinueDivision:
    X = closed_box([(0, 100)])

    def test_above_threshold(self):
        assert continue_division(closed_box([(0, 11)]), self.X, 10.0) is True

    def test_below_threshold(self):
        assert continue_division(closed_box([(0, 9)]), self.X, 10.0) is False

    def test_exactly_at_threshold_counts(self):
        assert continue_division(closed_box([(0, 10)]), self.X, 10.0) is True

    def test_zero_volume_domain_rejected(self):
        with pytest.raises(ValueError):
            continue_division(closed_box([(0, 1)]), closed_box([(5, 5)]), 10.0)


class TestCalcVolumeSum:
    def test_simple_sum(self):
        assert calc_volume_sum(closed_box([(0, 2)]), [closed_box([(0, 3)])]) == 5.0

    def test_published_division_ratio(self):
        total_after = calc_volume_sum(RANGES_AFTER[0], RANGES_AFTER[1:])
        assert total_after / hypervolume(RANGE_BEFORE) == pytest.approx(0.74, abs=0.01)

    def test_empty_surrds(self):
        assert calc_volume_sum(closed_box([(0, 2)]), []) == 2.0


class TestSampleOrders:
    def test_distinct_and_seeded(self):
        rng = random.Random(1)
        orders = sample_orders(4, 5, rng)
        assert len(orders) == 5
        assert len(set(orders)) == 5
        assert sample_orders(4, 5, random.Random(1)) == orders

    def test_capped_by_factorial(self):
        orders = sample_orders(2, 10, random.Random(0))
        assert sorted(orders) == [(0, 1), (1, 0)]


@pytest.fixture
def l_shape(solver):
    """Core and no-violation range produced by a real extraction run."""
    m = l_shape_model_2d()
    phi = parse_property("y > 0")
    X = closed_box([(0, 10), (0, 10)])
    violations = brute_force_violations(m, phi, GridSpec.from_box(X, m.kinds))
    assert violations == {(a, b) for a in (0, 1) for b in range(5)} | {(a, b) for a in (2, 3) for b in (3, 4)}
    rho = ConstraintSet(domain=X)
    result = range_extraction((F(0), F(0)), m, phi, rho, 10, X, solver)
    assert result.novios, "extraction must produce a no-violation range here"
    return m, phi, X, violations, result


class TestRangeDivision:
    def test_clean_outer_piece_dropped(self, l_shape, solver):
        m, phi, X, violations, extracted = l_shape
        rho = ConstraintSet(domain=X)
        core, iv, ce = extracted.vio, extracted.novios[-1], (F(0), F(0))
        # All 4! plane orders fit within r_c=24, so the dropping order is
        # guaranteed to be among the trials.
        outcome = range_division(core, iv, rho, 24, m, phi, ce, 42, solver)
        assert len(outcome.surrds) + 1 <= 2 * 2 + 1
        assert outcome.total_volume < hypervolume(core)
        assert contains(outcome.core, ce)
        # Coverage: every violating point still lies in a kept piece.
        pieces = [outcome.core, *outcome.surrds]
        for p in violations:
            q = (F(p[0]), F(p[1]))
            assert any(contains(piece, q) for piece in pieces)
        # Pieces are interior-disjoint and inside the input core.
        for piece in pieces:
            assert intersection(piece, core) == piece
        for i, a in enumerate(pieces):
            for b in pieces[i + 1 :]:
                assert intersection(a, b).is_empty(m.kinds)

    def test_face_sharing_iv_skips_empty_pieces(self, solver):
        # iv's upper face coincides with the core's upper face: the high
        # side of that cut is empty and must not cost a solver call. The
        # lower face produces a degenerate-but-nonempty slab, which is
        # checked and (violating here) kept.
        m = step_model()
        phi = parse_property("y > 0")
        X = closed_box([(-10, 10)])
        rho = ConstraintSet(domain=X)
        core = closed_box([(-10, -1)])
        iv = closed_box([(-10, -1)])
        calls_before = solver.calls
        outcome = range_division(core, iv, rho, 3, m, phi, (F(-5),), 7, solver)
        assert solver.calls - calls_before <= 2  # at most one call per order, none for the empty side
        assert calc_volume_sum(outcome.core, outcome.surrds) == pytest.approx(hypervolume(core))

    def test_nothing_dropped_when_all_pieces_violate(self, solver):
        # Real-kind model violating everywhere except an interior hole;
        # every off-piece sticks out of the hole, so nothing is dropped
        # and the total volume equals the input volume exactly.
        m = hole_model_2d()
        phi = parse_property("y > 0")
        X = closed_box([(0, 10), (0, 10)])
        rho = ConstraintSet(domain=X)
        core = X
        iv = closed_box([("4", "5.5"), ("4", "5.5")])
        assert isinstance(solver.check(m, phi, rho.with_confinement(iv)), Unsat)
        outcome = range_division(core, iv, rho, 6, m, phi, (F(1), F(1)), 3, solver)
        assert outcome.total_volume == pytest.approx(hypervolume(core), rel=1e-12)
        assert len(outcome.surrds) + 1 <= 2 * 2 + 1

    def test_deterministic_under_seed(self, l_shape, solver):
        m, phi, X, _, extracted = l_shape
        rho = ConstraintSet(domain=X)
        core, iv, ce = extracted.vio, extracted.novios[-1], (F(0), F(0))
        a = range_division(core, iv, rho, 5, m, phi, ce, 99, solver)
        b = range_division(core, iv, rho, 5, m, phi, ce, 99, solver)
        assert a == b

    def test_rejects_bad_arguments(self, l_shape, solver):
        m, phi, X, _, extracted = l_shape
        rho = ConstraintSet(domain=X)
        core, iv = extracted.vio, extracted.novios[-1]
        with pytest.raises(ValueError, match="r_c"):
            range_division(core, iv, rho, 0, m, phi, (F(0), F(0)), 1, solver)
        with pytest.raises(ValueError, match="outside the core"):
            range_division(core, iv, rho, 1, m, phi, (F(20), F(2)), 1, solver)

    def test_volume_never_increases_and_piece_bound(self, oracle_corpus, solver):
        runs = 0
        for m, X, _, phi in oracle_corpus:
            if runs >= 8:
                break
            rho = ConstraintSet(domain=X)
            seed_result = solver.check(m, phi, rho)
            if not isinstance(seed_result, Sat):
                continue
            extracted = range_extraction(seed_result.x, m, phi, rho, 4, X, solver)
            if not extracted.novios:
                continue
            runs += 1
            core = extracted.vio
            outcome = range_division(
                core, extracted.novios[-1], rho, 5, m, phi, seed_result.x, runs, solver
            )
            s = m.n_features
            assert outcome.total_volume <= hypervolume(core) + 1e-9
            assert len(outcome.surrds) + 1 <= 2 * s + 1
        assert runs >= 3
