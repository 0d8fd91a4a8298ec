"""Decision-tree ensemble representation, file ingestion and evaluation.

The canonical model file is UTF-8 JSON with every numeric value as a
decimal string, so thresholds and leaf values survive as exact rationals.
A model is a list of binary trees whose decision nodes test "x[k] < t"
(the yes branch is taken when the test holds) plus an aggregation rule:
`sum` adds the per-tree leaf values to a base score, `average` adds their
mean. Trees are validated on load and immutable afterwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Literal, Mapping, Sequence

from .rational import format_fraction, to_fraction

Point = tuple[Fraction, ...]

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The model file violates the canonical schema or a tree invariant."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: Literal["real", "integer"]


@dataclass(frozen=True)
class SplitNode:
    feature: int
    threshold: Fraction
    yes: int
    no: int


@dataclass(frozen=True)
class LeafNode:
    value: Fraction


@dataclass(frozen=True)
class Tree:
    root: int
    nodes: Mapping[int, SplitNode | LeafNode]


@dataclass(frozen=True)
class Ensemble:
    features: tuple[FeatureSpec, ...]
    trees: tuple[Tree, ...]
    aggregation: Literal["sum", "average"]
    base_score: Fraction

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(f.kind for f in self.features)


@dataclass(frozen=True)
class PathStep:
    feature: int
    threshold: Fraction
    branch: Literal["yes", "no"]


@dataclass(frozen=True)
class Path:
    steps: tuple[PathStep, ...]
    leaf_value: Fraction


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ModelFormatError(message)


def _parse_rational(raw: object, where: str) -> Fraction:
    if not isinstance(raw, (str, int)):
        raise ModelFormatError(f"{where}: numeric values must be decimal strings, got {raw!r}")
    try:
        return to_fraction(raw)
    except ValueError as exc:
        raise ModelFormatError(f"{where}: {exc}") from exc


def _parse_tree(data: object, index: int, n_features: int) -> Tree:
    where = f"tree {index}"
    _require(isinstance(data, dict), f"{where}: expected an object")
    _require("root" in data and "nodes" in data, f"{where}: needs 'root' and 'nodes'")
    raw_nodes = data["nodes"]
    _require(isinstance(raw_nodes, list) and raw_nodes, f"{where}: 'nodes' must be a non-empty list")

    nodes: dict[int, SplitNode | LeafNode] = {}
    for entry in raw_nodes:
        _require(isinstance(entry, dict), f"{where}: node entries must be objects")
        node_id = entry.get("id")
        _require(isinstance(node_id, int), f"{where}: node id must be an integer")
        _require(node_id not in nodes, f"{where}: duplicate node id {node_id}")
        kind = entry.get("kind")
        if kind == "split":
            feature = entry.get("feature")
            _require(isinstance(feature, int), f"{where} node {node_id}: feature must be an integer")
            _require(
                0 <= feature < n_features,
                f"{where} node {node_id}: feature index {feature} out of range (model has {n_features} features)",
            )
            threshold = _parse_rational(entry.get("threshold"), f"{where} node {node_id} threshold")
            yes, no = entry.get("yes"), entry.get("no")
            _require(isinstance(yes, int) and isinstance(no, int), f"{where} node {node_id}: yes/no must be node ids")
            nodes[node_id] = SplitNode(feature, threshold, yes, no)
        elif kind == "leaf":
            nodes[node_id] = LeafNode(_parse_rational(entry.get("value"), f"{where} node {node_id} value"))
        else:
            raise ModelFormatError(f"{where} node {node_id}: kind must be 'split' or 'leaf'")

    root = data["root"]
    _require(isinstance(root, int) and root in nodes, f"{where}: root {root!r} is not a node id")

    # Structural walk: catches dangling children, cycles, shared subtrees
    # (a second parent) and unreachable nodes in one pass.
    visited: set[int] = set()
    splits = leaves = 0
    stack = [root]
    while stack:
        node_id = stack.pop()
        if node_id in visited:
            raise ModelFormatError(f"{where}: node {node_id} reached twice (cycle or second parent)")
        visited.add(node_id)
        node = nodes[node_id]
        if isinstance(node, SplitNode):
            splits += 1
            for child in (node.yes, node.no):
                if child not in nodes:
                    raise ModelFormatError(f"{where} node {node_id}: dangling child index {child}")
                stack.append(child)
        else:
            leaves += 1
    unreachable = set(nodes) - visited
    _require(not unreachable, f"{where}: unreachable nodes {sorted(unreachable)}")
    _require(splits >= 1, f"{where}: a tree needs at least one split node")
    _require(leaves >= 2, f"{where}: a tree needs at least two leaves")
    return Tree(root=root, nodes=nodes)


def ensemble_from_dict(data: object) -> Ensemble:
    """Validate a decoded canonical model document."""
    _require(isinstance(data, dict), "model document must be a JSON object")
    _require(data.get("format_version") == FORMAT_VERSION, f"format_version must be {FORMAT_VERSION}")

    raw_features = data.get("features")
    _require(isinstance(raw_features, list) and len(raw_features) >= 1, "at least one feature is required")
    features: list[FeatureSpec] = []
    seen_names: set[str] = set()
    for i, entry in enumerate(raw_features):
        _require(isinstance(entry, dict), f"feature {i}: expected an object")
        name, kind = entry.get("name"), entry.get("kind")
        _require(isinstance(name, str) and name, f"feature {i}: name must be a non-empty string")
        _require(name not in seen_names, f"feature {i}: duplicate name {name!r}")
        seen_names.add(name)
        _require(kind in ("real", "integer"), f"feature {i}: kind must be 'real' or 'integer'")
        features.append(FeatureSpec(name, kind))

    agg = data.get("aggregation")
    _require(isinstance(agg, dict), "'aggregation' must be an object")
    mode = agg.get("mode")
    _require(mode in ("sum", "average"), "aggregation mode must be 'sum' or 'average'")
    base_score = _parse_rational(agg.get("base_score", "0"), "base_score")

    raw_trees = data.get("trees")
    _require(isinstance(raw_trees, list) and len(raw_trees) >= 1, "at least one tree is required")
    trees = tuple(_parse_tree(t, i, len(features)) for i, t in enumerate(raw_trees))

    return Ensemble(tuple(features), trees, mode, base_score)


def load_model(data: bytes | str) -> Ensemble:
    """Parse and validate a canonical model file."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        document = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return ensemble_from_dict(document)


def model_to_dict(m: Ensemble) -> dict:
    trees = []
    for tree in m.trees:
        nodes = []
        for node_id in sorted(tree.nodes):
            node = tree.nodes[node_id]
            if isinstance(node, SplitNode):
                nodes.append(
                    {
                        "id": node_id,
                        "kind": "split",
                        "feature": node.feature,
                        "threshold": format_fraction(node.threshold),
                        "yes": node.yes,
                        "no": node.no,
                    }
                )
            else:
                nodes.append({"id": node_id, "kind": "leaf", "value": format_fraction(node.value)})
        trees.append({"root": tree.root, "nodes": nodes})
    return {
        "format_version": FORMAT_VERSION,
        "features": [{"name": f.name, "kind": f.kind} for f in m.features],
        "aggregation": {"mode": m.aggregation, "base_score": format_fraction(m.base_score)},
        "trees": trees,
    }


def dump_model(m: Ensemble) -> bytes:
    """Serialize back to the canonical file format (load/dump round-trips)."""
    return (json.dumps(model_to_dict(m), indent=2, sort_keys=False) + "\n").encode("utf-8")


def as_point(values: Sequence[Fraction | int | str], m: Ensemble) -> Point:
    if len(values) != m.n_features:
        raise ValueError(f"point has {len(values)} coordinates, model expects {m.n_features}")
    return tuple(to_fraction(v) for v in values)


def predict_tree(tree: Tree, x: Sequence[Fraction]) -> Fraction:
    node = tree.nodes[tree.root]
    while isinstance(node, SplitNode):
        node = tree.nodes[node.yes if x[node.feature] < node.threshold else node.no]
    return node.value


def predict(m: Ensemble, x: Sequence[Fraction]) -> Fraction:
    """Exact model output for a point: traverse every tree, aggregate."""
    if len(x) != m.n_features:
        raise ValueError(f"point has {len(x)} coordinates, model expects {m.n_features}")
    total = sum((predict_tree(t, x) for t in m.trees), Fraction(0))
    if m.aggregation == "average":
        return m.base_score + total / len(m.trees)
    return m.base_score + total


def enumerate_paths(tree: Tree) -> list[Path]:
    """All root-to-leaf paths, one per leaf, yes branch first.

    The paths are mutually exclusive and exhaustive: any input satisfies
    the step conditions of exactly one path per tree.
    """
    paths: list[Path] = []
    stack: list[tuple[int, tuple[PathStep, ...]]] = [(tree.root, ())]
    while stack:
        node_id, steps = stack.pop()
        node = tree.nodes[node_id]
        if isinstance(node, LeafNode):
            paths.append(Path(steps, node.value))
            continue
        stack.append((node.no, steps + (PathStep(node.feature, node.threshold, "no"),)))
        stack.append((node.yes, steps + (PathStep(node.feature, node.threshold, "yes"),)))
    return paths


def path_satisfied(path: Path, x: Sequence[Fraction]) -> bool:
    for step in path.steps:
        holds = x[step.feature] < step.threshold
        if holds != (step.branch == "yes"):
            return False
    return True


def predict_via_paths(m: Ensemble, x: Sequence[Fraction]) -> Fraction:
    """Aggregate the unique satisfied path of each tree (equivalence check)."""
    total = Fraction(0)
    for tree in m.trees:
        matched = [p for p in enumerate_paths(tree) if path_satisfied(p, x)]
        if len(matched) != 1:
            raise AssertionError(f"{len(matched)} paths satisfied; expected exactly 1")
        total += matched[0].leaf_value
    if m.aggregation == "average":
        return m.base_score + total / len(m.trees)
    return m.base_score + total


def iter_leaves(tree: Tree) -> Iterator[LeafNode]:
    for node in tree.nodes.values():
        if isinstance(node, LeafNode):
            yield node


def tree_depth(tree: Tree) -> int:
    """Longest number of splits along any root-to-leaf path."""
    best = 0
    stack = [(tree.root, 0)]
    while stack:
        node_id, depth = stack.pop()
        node = tree.nodes[node_id]
        if isinstance(node, SplitNode):
            stack.append((node.yes, depth + 1))
            stack.append((node.no, depth + 1))
        else:
            best = max(best, depth)
    return best
