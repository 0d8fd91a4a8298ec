"""Hand-built models and small utilities shared across the test modules."""

from __future__ import annotations

import json

from tree_sentinel.model import Ensemble, ensemble_from_dict


def model_doc(features, trees, mode="sum", base="0"):
    return {
        "format_version": 1,
        "features": features,
        "aggregation": {"mode": mode, "base_score": base},
        "trees": trees,
    }


def feat(n, kind="integer"):
    return [{"name": f"f{k}", "kind": kind} for k in range(n)]


def split(node_id, feature, threshold, yes, no):
    return {"id": node_id, "kind": "split", "feature": feature, "threshold": str(threshold), "yes": yes, "no": no}


def leaf(node_id, value):
    return {"id": node_id, "kind": "leaf", "value": str(value)}


def make(doc) -> Ensemble:
    return ensemble_from_dict(doc)


def to_bytes(doc) -> bytes:
    return json.dumps(doc).encode("utf-8")


def step_model(kind="integer") -> Ensemble:
    """y = -1 if x[0] < 0 else 1."""
    tree = {"root": 0, "nodes": [split(0, 0, 0, 1, 2), leaf(1, -1), leaf(2, 1)]}
    return make(model_doc(feat(1, kind), [tree]))


def interval_model_1d(lo, hi, inside=-1, outside=1) -> Ensemble:
    """y = inside for lo <= x[0] <= hi, else outside (integer feature)."""
    tree = {
        "root": 0,
        "nodes": [
            split(0, 0, lo, 1, 2),
            leaf(1, outside),
            split(2, 0, hi + 1, 3, 4),
            leaf(3, inside),
            leaf(4, outside),
        ],
    }
    return make(model_doc(feat(1), [tree]))


def two_interval_model_1d(a_lo, a_hi, b_lo, b_hi, inside=-1, outside=1) -> Ensemble:
    """y = inside on [a_lo, a_hi] and [b_lo, b_hi], else outside."""
    assert a_hi + 1 < b_lo
    tree = {
        "root": 0,
        "nodes": [
            split(0, 0, a_lo, 1, 2),
            leaf(1, outside),
            split(2, 0, a_hi + 1, 3, 4),
            leaf(3, inside),
            split(4, 0, b_lo, 5, 6),
            leaf(5, outside),
            split(6, 0, b_hi + 1, 7, 8),
            leaf(7, inside),
            leaf(8, outside),
        ],
    }
    return make(model_doc(feat(1), [tree]))


def l_shape_model_2d() -> Ensemble:
    """Violating region {0,1}x{0..4} union {2,3}x{3,4} for 'y > 0'.

    Growing from (0,0) with unit margins, the x0-upper probe at low
    heights is clean but becomes violating once x1 has grown, so a
    no-violation range gets recorded; dividing along it can then split a
    wholly clean band off the violation range.
    """
    tree = {
        "root": 0,
        "nodes": [
            split(0, 0, 2, 1, 2),  # x0 < 2: left strip
            split(1, 1, 5, 3, 4),
            leaf(3, -1),
            leaf(4, 1),
            split(2, 0, 4, 5, 6),  # 2 <= x0 < 4: upper notch
            split(5, 1, 3, 7, 8),
            leaf(7, 1),
            split(8, 1, 5, 9, 10),
            leaf(9, -1),
            leaf(10, 1),
            leaf(6, 1),
        ],
    }
    return make(model_doc(feat(2), [tree]))


def t_shape_model_2d() -> Ensemble:
    """Violating region {0..6}x{0,1} (bar) union {3}x{2..6} (stem)."""
    tree = {
        "root": 0,
        "nodes": [
            split(0, 1, 2, 1, 2),
            split(1, 0, 7, 3, 4),
            leaf(3, -1),
            leaf(4, 1),
            split(2, 0, 3, 5, 6),
            leaf(5, 1),
            split(6, 0, 4, 7, 8),
            split(7, 1, 7, 9, 10),
            leaf(9, -1),
            leaf(10, 1),
            leaf(8, 1),
        ],
    }
    return make(model_doc(feat(2), [tree]))


def t_down_model_2d() -> Ensemble:
    """Violating region {0..6}x{5,6} (bar) union {3}x{0..4} (stem)."""
    tree = {
        "root": 0,
        "nodes": [
            split(0, 1, 5, 1, 2),
            split(1, 0, 3, 3, 4),
            leaf(3, 1),
            split(4, 0, 4, 5, 6),
            leaf(5, -1),
            leaf(6, 1),
            split(2, 1, 7, 7, 8),
            split(7, 0, 7, 9, 10),
            leaf(9, -1),
            leaf(10, 1),
            leaf(8, 1),
        ],
    }
    return make(model_doc(feat(2), [tree]))


def cross_model_2d() -> Ensemble:
    """Violating region {0..8}x{4} union {4}x{0..8} (a plus sign)."""
    tree = {
        "root": 0,
        "nodes": [
            split(0, 1, 4, 1, 2),
            split(1, 0, 4, 3, 4),
            leaf(3, 1),
            split(4, 0, 5, 5, 6),
            leaf(5, -1),
            leaf(6, 1),
            split(2, 1, 5, 7, 8),
            split(7, 0, 9, 9, 10),
            leaf(9, -1),
            leaf(10, 1),
            split(8, 0, 4, 11, 12),
            leaf(11, 1),
            split(12, 0, 5, 13, 14),
            split(13, 1, 9, 15, 16),
            leaf(15, -1),
            leaf(16, 1),
            leaf(14, 1),
        ],
    }
    return make(model_doc(feat(2), [tree]))


def hole_model_2d() -> Ensemble:
    """Real-kind model violating 'y > 0' everywhere except the open square
    [4,6) x [4,6)."""
    tree = {
        "root": 0,
        "nodes": [
            split(0, 0, 4, 1, 2),
            leaf(1, -1),
            split(2, 0, 6, 3, 4),
            split(3, 1, 4, 5, 6),
            leaf(5, -1),
            split(6, 1, 6, 7, 8),
            leaf(7, 1),
            leaf(8, -1),
            leaf(4, -1),
        ],
    }
    return make(model_doc(feat(2, "real"), [tree]))


def complete_tree_doc(depth, feature=0, threshold=5):
    """Complete binary tree of the given split depth; leaves numbered."""
    nodes = []
    counter = [0]

    def build(d):
        node_id = counter[0]
        counter[0] += 1
        if d == depth:
            nodes.append(leaf(node_id, 1))
            return node_id
        entry = split(node_id, feature, threshold, -1, -1)
        nodes.append(entry)
        entry["yes"] = build(d + 1)
        entry["no"] = build(d + 1)
        return node_id

    build(0)
    return {"root": 0, "nodes": nodes}
