"""Seeded synthetic models, domains and properties.

Used by the benchmark harness to sweep model size knobs, and by the test
suite as a corpus generator. Everything is driven by a caller-supplied
random.Random so runs are reproducible.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .geometry import Box, closed_box
from .model import Ensemble, ensemble_from_dict, iter_leaves
from .rational import format_fraction


def _random_threshold(rng: random.Random, kind: str, low: int, high: int) -> str:
    if kind == "integer":
        if rng.random() < 0.5:
            return str(rng.randint(low + 1, high))
        return format_fraction(Fraction(2 * rng.randint(low, high - 1) + 1, 2))
    return format_fraction(Fraction(rng.randint(low * 10 + 1, high * 10 - 1), 10))


def _random_leaf(rng: random.Random) -> str:
    return format_fraction(Fraction(rng.randint(-50, 50), 10))


def _random_tree(rng: random.Random, max_depth: int, s: int, kind: str, low: int, high: int, full: bool) -> dict:
    nodes: list[dict] = []

    def build(depth: int) -> int:
        node_id = len(nodes)
        nodes.append({})
        is_split = depth == 0 or (depth < max_depth and (full or rng.random() < 0.7))
        if is_split:
            feature = rng.randrange(s)
            threshold = _random_threshold(rng, kind, low, high)
            yes = build(depth + 1)
            no = build(depth + 1)
            nodes[node_id] = {
                "id": node_id,
                "kind": "split",
                "feature": feature,
                "threshold": threshold,
                "yes": yes,
                "no": no,
            }
        else:
            nodes[node_id] = {"id": node_id, "kind": "leaf", "value": _random_leaf(rng)}
        return node_id

    build(0)
    return {"root": 0, "nodes": nodes}


def random_ensemble(
    rng: random.Random,
    n_trees: int,
    max_depth: int,
    s: int,
    *,
    kind: str = "integer",
    low: int = 0,
    high: int = 10,
    full: bool = False,
) -> tuple[Ensemble, Box]:
    """A random validated ensemble plus its closed domain box.

    With `full=True` every tree is a complete binary tree of exactly
    `max_depth` levels of splits (size-controlled benchmark shape);
    otherwise trees are randomly skewed up to that depth.
    """
    document = {
        "format_version": 1,
        "features": [{"name": f"f{k}", "kind": kind} for k in range(s)],
        "aggregation": {
            "mode": rng.choice(["sum", "average"]),
            "base_score": format_fraction(Fraction(rng.randint(-20, 20), 10)) if rng.random() < 0.3 else "0",
        },
        "trees": [_random_tree(rng, max_depth, s, kind, low, high, full) for _ in range(n_trees)],
    }
    domain = closed_box([(low, high)] * s)
    return ensemble_from_dict(document), domain


def output_bounds(m: Ensemble) -> tuple[Fraction, Fraction]:
    """Loose but sound bounds on the model output over any input."""
    lows: list[Fraction] = []
    highs: list[Fraction] = []
    for tree in m.trees:
        values = [leaf.value for leaf in iter_leaves(tree)]
        lows.append(min(values))
        highs.append(max(values))
    low, high = sum(lows, Fraction(0)), sum(highs, Fraction(0))
    if m.aggregation == "average":
        low, high = low / len(m.trees), high / len(m.trees)
    return m.base_score + low, m.base_score + high


def random_property(rng: random.Random, m: Ensemble, *, low: int = 0, high: int = 10) -> str:
    """Random property text over y (and sometimes x) whose constants sit in
    and around the reachable output range, so both satisfiable and
    unsatisfiable verdicts occur across a corpus."""
    y_low, y_high = output_bounds(m)
    span = max(y_high - y_low, Fraction(1))

    def y_constant() -> str:
        offset = Fraction(rng.randint(-12, 22), 10) * span
        # Quantized to tenths so the text stays in the decimal grammar.
        return format_fraction(Fraction(int((y_low + offset) * 10), 10))

    def y_atom() -> str:
        return f"y {rng.choice(['<', '<=', '>', '>='])} {y_constant()}"

    def x_atom() -> str:
        k = rng.randrange(m.n_features)
        bound = rng.randint(low, high)
        return f"x[{k}] {rng.choice(['<', '<=', '>', '>=', '==', '!='])} {bound}"

    roll = rng.random()
    if roll < 0.4:
        return y_atom()
    if roll < 0.6:
        return f"{x_atom()} => {y_atom()}"
    if roll < 0.75:
        return f"{y_atom()} && {y_atom()}"
    if roll < 0.9:
        return f"{y_atom()} || {y_atom()}"
    return f"!({y_atom()})"
