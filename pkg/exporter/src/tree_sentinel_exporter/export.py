"""Convert trained tree ensembles to the canonical verifier model format.

Supported sources:

* scikit-learn ``GradientBoostingRegressor`` (sum aggregation, base score
  from the fitted init estimator, leaf values scaled by the learning rate)
* scikit-learn ``RandomForestRegressor`` / ``ExtraTreesRegressor``
  (average aggregation, base score 0)
* scikit-learn ``DecisionTreeRegressor`` (a single-tree sum)
* classic XGBoost text-dump JSON (structure-only, no parity check, since
  the source library is not required to be installed)

scikit-learn splits send ``x <= t`` to the left child while the canonical
format branches on ``x < tau``. The conversion is exact, not approximate:

* integer features:  tau = floor(t) + 1, so ``x < tau`` equals ``x <= t``
  for every integer x;
* real features:     tau = nextafter(t, +inf), so ``x < tau`` equals
  ``x <= t`` for every float64 x.

Every successful export is gated by a prediction-parity check: a seeded
sample of in-domain points is pushed through the source library and
through an exact-rational re-implementation of the canonical semantics;
the maximum absolute deviation must stay within PARITY_TOLERANCE.

sklearn's per-node missing-value routing is never consulted for complete
inputs, and the verifier assumes all features are present, so it does not
affect the conversion. The XGBoost dump format does encode an explicit
missing branch; a dump whose missing branch differs from its yes branch
is rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

PARITY_TOLERANCE = 1e-6

FORMAT_VERSION = 1


class ExporterError(ValueError):
    pass


class UnsupportedModelError(ExporterError):
    pass


class ParityError(ExporterError):
    pass


def _format_rational(value: Fraction) -> str:
    """Exact decimal text; falls back to "p/q" for non-decimal rationals."""
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    rest, twos, fives = den, 0, 0
    while rest % 2 == 0:
        rest //= 2
        twos += 1
    while rest % 5 == 0:
        rest //= 5
        fives += 1
    if rest != 1:
        return f"{num}/{den}"
    shift = max(twos, fives)
    digits = str(abs(num) * 10**shift // den).rjust(shift + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


def _convert_threshold(raw: float, kind: str) -> Fraction:
    """Exact boundary for sklearn's split predicate.

    sklearn casts inputs to float32 before comparing, so the effective
    predicate on a float64 input x is float32(x) <= t. For integer
    features (float32-exact up to 2^24) that is x <= t, hence
    tau = floor(t) + 1. For real features the set {x : float32(x) <= t}
    is the half-line below the rounding boundary between the last float32
    not above t and the next float32 up; whether the boundary itself
    belongs to the set depends on round-half-to-even.
    """
    if kind == "integer":
        return Fraction(math.floor(raw) + 1)
    low32 = np.float32(raw)
    if float(low32) > raw:
        low32 = np.nextafter(low32, np.float32(-np.inf))
    high32 = np.nextafter(low32, np.float32(np.inf))
    boundary = (Fraction(float(low32)) + Fraction(float(high32))) / 2
    if float(np.float32(float(boundary))) <= raw:
        # The midpoint rounds down, so it still satisfies the predicate.
        return Fraction(math.nextafter(float(boundary), math.inf))
    return boundary


def _sklearn_tree_doc(tree, kinds: Sequence[str], scale: float) -> dict:
    """One fitted sklearn Tree to a canonical tree document.

    Leaf values reproduce the library's own float arithmetic (scale *
    value as a float64 product) before being frozen as exact rationals.
    """
    left, right = tree.children_left, tree.children_right
    features, thresholds, values = tree.feature, tree.threshold, tree.value
    nodes = []
    for node_id in range(tree.node_count):
        if left[node_id] == -1:
            leaf_value = Fraction(float(scale * values[node_id][0][0]))
            nodes.append({"id": node_id, "kind": "leaf", "value": _format_rational(leaf_value)})
        else:
            k = int(features[node_id])
            tau = _convert_threshold(float(thresholds[node_id]), kinds[k])
            nodes.append(
                {
                    "id": node_id,
                    "kind": "split",
                    "feature": k,
                    "threshold": _format_rational(tau),
                    "yes": int(left[node_id]),
                    "no": int(right[node_id]),
                }
            )
    return {"root": 0, "nodes": nodes}


def _tree_depth(tree) -> int:
    depth = 0
    stack = [(0, 0)]
    while stack:
        node_id, d = stack.pop()
        if tree.children_left[node_id] == -1:
            depth = max(depth, d)
        else:
            stack.append((int(tree.children_left[node_id]), d + 1))
            stack.append((int(tree.children_right[node_id]), d + 1))
    return depth


def _resolve_source(estimator):
    """(tree list, leaf scale, aggregation mode, base score, max depth)."""
    from sklearn.ensemble import (
        ExtraTreesRegressor,
        GradientBoostingRegressor,
        RandomForestRegressor,
    )
    from sklearn.tree import DecisionTreeRegressor

    hist_name = type(estimator).__name__
    if hist_name.startswith("HistGradientBoosting"):
        if getattr(estimator, "categorical_features", None) is not None:
            raise UnsupportedModelError(
                "categorical splits are not supported; only numeric threshold splits convert"
            )
        raise UnsupportedModelError(
            f"{hist_name} uses binned predictors that this exporter does not convert; "
            "use GradientBoostingRegressor or RandomForestRegressor"
        )

    if isinstance(estimator, GradientBoostingRegressor):
        trees = [stage.tree_ for stage in estimator.estimators_[:, 0]]
        init = getattr(estimator, "init_", None)
        if init == "zero" or estimator.init == "zero":
            base = Fraction(0)
        elif hasattr(init, "predict"):
            probe = np.zeros((1, estimator.n_features_in_))
            base = Fraction(float(init.predict(probe)[0]))
        else:
            raise UnsupportedModelError("cannot read the fitted init estimator for the base score")
        return trees, float(estimator.learning_rate), "sum", base, estimator.max_depth

    if isinstance(estimator, (RandomForestRegressor, ExtraTreesRegressor)):
        trees = [member.tree_ for member in estimator.estimators_]
        return trees, 1.0, "average", Fraction(0), estimator.max_depth

    if isinstance(estimator, DecisionTreeRegressor):
        return [estimator.tree_], 1.0, "sum", Fraction(0), estimator.max_depth

    raise UnsupportedModelError(
        f"unsupported estimator type {type(estimator).__name__}; supported: "
        "GradientBoostingRegressor, RandomForestRegressor, ExtraTreesRegressor, DecisionTreeRegressor"
    )


# ---------------------------------------------------------------------------
# Exact re-implementation of the canonical prediction semantics
# ---------------------------------------------------------------------------


def predict_document(document: dict, x: Sequence[Fraction]) -> Fraction:
    """Evaluate a canonical model document with exact rationals.

    Deliberately independent of the verifier package: parity compares the
    source library against the file as written, through its documented
    semantics (yes branch iff x[k] < threshold).
    """
    total = Fraction(0)
    for tree in document["trees"]:
        nodes = {node["id"]: node for node in tree["nodes"]}
        node = nodes[tree["root"]]
        while node["kind"] == "split":
            taken = "yes" if x[node["feature"]] < Fraction(node["threshold"]) else "no"
            node = nodes[node[taken]]
        total += Fraction(node["value"])
    base = Fraction(document["aggregation"]["base_score"])
    if document["aggregation"]["mode"] == "average":
        return base + total / len(document["trees"])
    return base + total


def _sample_points(
    rng: np.random.RandomState,
    kinds: Sequence[str],
    bounds: Sequence[tuple[float, float]],
    count: int,
) -> np.ndarray:
    columns = []
    for kind, (low, high) in zip(kinds, bounds):
        if kind == "integer":
            columns.append(rng.randint(int(math.floor(low)), int(math.floor(high)) + 1, size=count))
        else:
            columns.append(rng.uniform(low, high, size=count))
    return np.column_stack(columns).astype(np.float64)


def _default_bounds(trees, n_features: int) -> list[tuple[float, float]]:
    """Per-feature sampling ranges spanning every split threshold."""
    lows = [0.0] * n_features
    highs = [1.0] * n_features
    seen = [False] * n_features
    for tree in trees:
        for node_id in range(tree.node_count):
            if tree.children_left[node_id] != -1:
                k = int(tree.feature[node_id])
                t = float(tree.threshold[node_id])
                if not seen[k]:
                    lows[k], highs[k], seen[k] = t, t, True
                else:
                    lows[k], highs[k] = min(lows[k], t), max(highs[k], t)
    return [(low - 1.0, high + 1.0) for low, high in zip(lows, highs)]


@dataclass(frozen=True)
class ExportResult:
    model: dict
    manifest: dict

    def model_bytes(self) -> bytes:
        return (json.dumps(self.model, indent=2) + "\n").encode("utf-8")

    def manifest_bytes(self) -> bytes:
        return (json.dumps(self.manifest, indent=2) + "\n").encode("utf-8")


def export_model(
    estimator,
    feature_names: Sequence[str],
    feature_kinds: Sequence[str],
    *,
    parity_samples: int = 1000,
    seed: int = 0,
    bounds: Sequence[tuple[float, float]] | None = None,
    provenance: str = "",
) -> ExportResult:
    """Convert a fitted estimator and verify prediction parity.

    Raises ParityError when the maximum absolute deviation between the
    source library and the canonical file exceeds PARITY_TOLERANCE over
    `parity_samples` seeded in-domain points.
    """
    import sklearn

    if len(feature_names) != len(feature_kinds):
        raise ExporterError("feature_names and feature_kinds must have the same length")
    for kind in feature_kinds:
        if kind not in ("real", "integer"):
            raise ExporterError(f"feature kind must be 'real' or 'integer', got {kind!r}")
    n_features = getattr(estimator, "n_features_in_", None)
    if n_features is not None and n_features != len(feature_names):
        raise ExporterError(
            f"estimator was fitted on {n_features} features but {len(feature_names)} names given"
        )

    trees, scale, mode, base, max_depth_param = _resolve_source(estimator)
    document = {
        "format_version": FORMAT_VERSION,
        "features": [{"name": n, "kind": k} for n, k in zip(feature_names, feature_kinds)],
        "aggregation": {"mode": mode, "base_score": _format_rational(base)},
        "trees": [_sklearn_tree_doc(t, feature_kinds, scale) for t in trees],
    }

    rng = np.random.RandomState(seed)
    sample_bounds = list(bounds) if bounds is not None else _default_bounds(trees, len(feature_names))
    points = _sample_points(rng, feature_kinds, sample_bounds, parity_samples)
    source = estimator.predict(points)
    worst = 0.0
    for row, expected in zip(points, source):
        x = [Fraction(float(v)) for v in row]
        got = float(predict_document(document, x))
        worst = max(worst, abs(got - float(expected)))
    if worst > PARITY_TOLERANCE:
        raise ParityError(
            f"prediction parity failed: max abs deviation {worst:.3e} exceeds {PARITY_TOLERANCE:.0e}"
        )

    manifest = {
        "source_library": "scikit-learn",
        "source_version": sklearn.__version__,
        "estimator": type(estimator).__name__,
        "n_est": len(trees),
        "max_d": max(_tree_depth(t) for t in trees),
        "max_depth_param": max_depth_param,
        "features": [{"name": n, "kind": k} for n, k in zip(feature_names, feature_kinds)],
        "parity": {"samples": parity_samples, "max_abs_deviation": worst, "seed": seed},
        "provenance": provenance,
    }
    return ExportResult(document, manifest)


# ---------------------------------------------------------------------------
# XGBoost text-dump conversion (structure only)
# ---------------------------------------------------------------------------


def convert_xgboost_dump(
    dump: list,
    feature_names: Sequence[str],
    feature_kinds: Sequence[str],
    *,
    mode: str,
    base_score: str,
) -> dict:
    """Convert a classic XGBoost JSON dump (list of nested node objects).

    The dump format carries no aggregation metadata, so `mode` and
    `base_score` must be given explicitly. No parity check is possible
    without the source library; the caller should verify downstream.
    Dumps routing missing values away from the yes branch are rejected,
    because the canonical format assumes all features are present.
    """
    if mode not in ("sum", "average"):
        raise ExporterError("mode must be 'sum' or 'average'")
    name_to_index = {name: k for k, name in enumerate(feature_names)}

    def dump_number(value) -> Fraction:
        # Dumps parsed with parse_float=str keep their exact decimal text;
        # already-converted floats fall back to their shortest round-trip
        # representation.
        return Fraction(value if isinstance(value, str) else repr(float(value)))

    def convert_node(node: dict, out: list) -> None:
        if "leaf" in node:
            out.append(
                {"id": int(node["nodeid"]), "kind": "leaf", "value": _format_rational(dump_number(node["leaf"]))}
            )
            return
        if "split_condition" not in node:
            raise UnsupportedModelError(f"unsupported split type in node {node.get('nodeid')}")
        if "missing" in node and node["missing"] != node["yes"]:
            raise UnsupportedModelError(
                f"node {node['nodeid']} routes missing values to child {node['missing']} "
                f"instead of its yes child {node['yes']}; the canonical format has no "
                "missing-value branch, so this model cannot be converted"
            )
        split = node["split"]
        if split in name_to_index:
            k = name_to_index[split]
        elif isinstance(split, str) and split.startswith("f") and split[1:].isdigit():
            k = int(split[1:])
        elif isinstance(split, int):
            k = split
        else:
            raise UnsupportedModelError(f"cannot resolve split feature {split!r}")
        if not 0 <= k < len(feature_names):
            raise ExporterError(f"split feature index {k} out of range")
        threshold = dump_number(node["split_condition"])
        # XGBoost's yes branch is x < t already; integer features still get
        # an integral threshold so the solver's Int sort stays exact.
        tau = Fraction(math.ceil(threshold)) if feature_kinds[k] == "integer" else threshold
        out.append(
            {
                "id": int(node["nodeid"]),
                "kind": "split",
                "feature": k,
                "threshold": _format_rational(tau),
                "yes": int(node["yes"]),
                "no": int(node["no"]),
            }
        )
        for child in node.get("children", []):
            convert_node(child, out)

    trees = []
    for root in dump:
        nodes: list = []
        convert_node(root, nodes)
        trees.append({"root": int(root["nodeid"]), "nodes": nodes})
    return {
        "format_version": FORMAT_VERSION,
        "features": [{"name": n, "kind": k} for n, k in zip(feature_names, feature_kinds)],
        "aggregation": {"mode": mode, "base_score": base_score},
        "trees": trees,
    }
