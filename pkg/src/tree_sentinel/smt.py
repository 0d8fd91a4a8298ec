"""SMT-LIB v2 encoding of (model, negated property, constraints) and the
external-solver transport.

The formula follows the model structure directly: for every tree i and
every root-to-leaf path p, an implication

    (and x[k1] < t1 ... x[kd] >= td)  =>  y_i = leaf value

plus the aggregation equation tying y to the per-tree outputs, plus the
negated property, plus the active constraint set (domain box, optional
confinement box, accumulated exclusion boxes). A satisfying assignment is
a counterexample; unsat proves the property over the constrained domain.

Transport is SMT-LIB v2 text over a subprocess. The default is a fresh
process per query (isolation; one process per reported solver call). A
persistent session mode that frames each query with (reset) is available
as an opt-in optimization for slow-to-start solvers; every query is still
self-contained, so results and call counts are unchanged.

Every command is emitted on its own line, and identical inputs always
produce byte-identical scripts.
"""

from __future__ import annotations

import math
import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Sequence, Union

from .geometry import Box, Point, contains
from .model import Ensemble, enumerate_paths, predict
from .properties import And, Atom, Implies, Not, Or, Property, bind_property, evaluate_property
from .rational import format_fraction

DEFAULT_SOLVER_CMD = "z3 -in"
SOLVER_ENV_VAR = "TREE_SENTINEL_SOLVER"

_SYNC_MARKER = "::query-done::"


class SolverError(RuntimeError):
    pass


class SolverNotFoundError(SolverError):
    """The configured solver command could not be executed."""


class SolverProtocolError(SolverError):
    """The solver produced output we cannot interpret."""


class EncodingBugError(SolverError):
    """A solver model failed exact revalidation against the tree semantics.

    This is never a user error: it means the emitted formula and the
    reference evaluation disagree, so verification results cannot be
    trusted until the discrepancy is fixed.
    """


class BudgetExhaustedError(RuntimeError):
    """Raised before a solver call when the detection time budget is spent."""


# ---------------------------------------------------------------------------
# Constraint sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    """The running constraint on inputs: a domain box, an optional
    confinement box narrowing the search, and excluded boxes whose
    complements are conjoined."""

    domain: Box
    confinement: Box | None = None
    exclusions: tuple[Box, ...] = ()

    def __post_init__(self) -> None:
        dims = self.domain.dims
        for box in ((self.confinement,) if self.confinement else ()) + self.exclusions:
            if box.dims != dims:
                raise ValueError("all constraint boxes must share the domain dimensionality")

    def with_confinement(self, box: Box) -> "ConstraintSet":
        if self.confinement is not None:
            raise ValueError("constraint set already has a confinement box")
        return replace(self, confinement=box)

    def excluding(self, box: Box) -> "ConstraintSet":
        return replace(self, exclusions=self.exclusions + (box,))

    def admits(self, x: Sequence[Fraction]) -> bool:
        if not contains(self.domain, x):
            return False
        if self.confinement is not None and not contains(self.confinement, x):
            return False
        return not any(contains(ex, x) for ex in self.exclusions)


# ---------------------------------------------------------------------------
# Term emission
# ---------------------------------------------------------------------------


def smt_int_literal(v: Fraction | int) -> str:
    n = int(v)
    return str(n) if n >= 0 else f"(- {-n})"


def smt_real_literal(v: Fraction) -> str:
    def positive(f: Fraction) -> str:
        text = format_fraction(f)
        if "/" in text:
            p, q = text.split("/")
            return f"(/ {p}.0 {q}.0)"
        return text if "." in text else f"{text}.0"

    if v < 0:
        return f"(- {positive(-v)})"
    return positive(v)


def compare_term(symbol: str, op: str, value: Fraction, integer: bool) -> str:
    """One comparison as an SMT term.

    Integer-sorted variables get integerized constants (x < t becomes
    x < ceil(t), x <= t becomes x <= floor(t), and so on), which is exact
    over the integers and keeps every atom well-sorted without to_real.
    """
    if integer:
        if op == "<":
            return f"(< {symbol} {smt_int_literal(math.ceil(value))})"
        if op == "<=":
            return f"(<= {symbol} {smt_int_literal(math.floor(value))})"
        if op == ">":
            return f"(> {symbol} {smt_int_literal(math.floor(value))})"
        if op == ">=":
            return f"(>= {symbol} {smt_int_literal(math.ceil(value))})"
        if op == "==":
            return f"(= {symbol} {smt_int_literal(value)})" if value.denominator == 1 else "false"
        if op == "!=":
            return f"(not (= {symbol} {smt_int_literal(value)}))" if value.denominator == 1 else "true"
    else:
        lit = smt_real_literal(value)
        if op == "==":
            return f"(= {symbol} {lit})"
        if op == "!=":
            return f"(not (= {symbol} {lit}))"
        if op in ("<", "<=", ">", ">="):
            return f"({op} {symbol} {lit})"
    raise ValueError(f"unsupported comparison operator {op!r}")


def _x_symbol(k: int) -> str:
    return f"x{k}"


def _tree_symbol(i: int) -> str:
    return f"y{i}"


def encode_model(m: Ensemble) -> list[str]:
    """Declarations and assertions pinning y to the ensemble output.

    One implication per path of each tree (yes steps use "<", no steps
    ">="), then the aggregation equation. Averages are encoded division
    free as  card(T) * y = card(T) * base + sum(y_i).
    """
    kinds = m.kinds
    lines: list[str] = []
    for k, feature in enumerate(m.features):
        sort = "Int" if feature.kind == "integer" else "Real"
        lines.append(f"(declare-const {_x_symbol(k)} {sort})")
    for i in range(1, len(m.trees) + 1):
        lines.append(f"(declare-const {_tree_symbol(i)} Real)")
    lines.append("(declare-const y Real)")

    for i, tree in enumerate(m.trees, start=1):
        for path in enumerate_paths(tree):
            conds = [
                compare_term(
                    _x_symbol(step.feature),
                    "<" if step.branch == "yes" else ">=",
                    step.threshold,
                    kinds[step.feature] == "integer",
                )
                for step in path.steps
            ]
            antecedent = conds[0] if len(conds) == 1 else "(and " + " ".join(conds) + ")"
            consequent = f"(= {_tree_symbol(i)} {smt_real_literal(path.leaf_value)})"
            lines.append(f"(assert (=> {antecedent} {consequent}))")

    tree_syms = [_tree_symbol(i) for i in range(1, len(m.trees) + 1)]
    if m.aggregation == "sum":
        parts = ([smt_real_literal(m.base_score)] if m.base_score != 0 else []) + tree_syms
        rhs = parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"
        lines.append(f"(assert (= y {rhs}))")
    else:
        n = len(m.trees)
        scaled_base = m.base_score * n
        parts = ([smt_real_literal(scaled_base)] if scaled_base != 0 else []) + tree_syms
        rhs = parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"
        lines.append(f"(assert (= (* {smt_real_literal(Fraction(n))} y) {rhs}))")
    return lines


def property_to_term(phi: Property, kinds: Sequence[str]) -> str:
    if isinstance(phi, Atom):
        if phi.target == "y":
            return compare_term("y", phi.op, phi.value, False)
        return compare_term(_x_symbol(phi.index), phi.op, phi.value, kinds[phi.index] == "integer")
    if isinstance(phi, Not):
        return f"(not {property_to_term(phi.operand, kinds)})"
    if isinstance(phi, And):
        return f"(and {property_to_term(phi.left, kinds)} {property_to_term(phi.right, kinds)})"
    if isinstance(phi, Or):
        return f"(or {property_to_term(phi.left, kinds)} {property_to_term(phi.right, kinds)})"
    if isinstance(phi, Implies):
        return f"(=> {property_to_term(phi.antecedent, kinds)} {property_to_term(phi.consequent, kinds)})"
    raise TypeError(f"not a property node: {phi!r}")


def _within_terms(box: Box, kinds: Sequence[str]) -> list[str]:
    terms: list[str] = []
    for k, iv in enumerate(box.intervals):
        integer = kinds[k] == "integer"
        terms.append(compare_term(_x_symbol(k), ">=" if iv.lower.closed else ">", iv.lower.value, integer))
        terms.append(compare_term(_x_symbol(k), "<=" if iv.upper.closed else "<", iv.upper.value, integer))
    return terms


def constraint_to_assertions(rho: ConstraintSet, kinds: Sequence[str]) -> list[str]:
    """Domain/confinement boxes become per-dimension bound assertions;
    each exclusion becomes one disjunction over "outside either face",
    with strictness flipped (the complement of a closed bound is strict)."""
    lines = [f"(assert {t})" for t in _within_terms(rho.domain, kinds)]
    if rho.confinement is not None:
        lines.extend(f"(assert {t})" for t in _within_terms(rho.confinement, kinds))
    for box in rho.exclusions:
        disjuncts: list[str] = []
        for k, iv in enumerate(box.intervals):
            integer = kinds[k] == "integer"
            disjuncts.append(compare_term(_x_symbol(k), "<" if iv.lower.closed else "<=", iv.lower.value, integer))
            disjuncts.append(compare_term(_x_symbol(k), ">" if iv.upper.closed else ">=", iv.upper.value, integer))
        lines.append("(assert (or " + " ".join(disjuncts) + "))")
    return lines


@dataclass(frozen=True)
class Query:
    """A full solver script plus the symbols it binds.

    `script` ends with (check-sat); `value_query` asks for the input
    vector and y. Scripts are deterministic: identical inputs produce
    byte-identical text.
    """

    script: str
    value_query: str
    x_symbols: tuple[str, ...]
    y_symbol: str
    tree_symbols: tuple[str, ...]


def build_query(m: Ensemble, phi: Property, rho: ConstraintSet, *, negate_property: bool = True) -> Query:
    if rho.domain.dims != m.n_features:
        raise ValueError("constraint dimensionality does not match the model")
    kinds = m.kinds
    logic = "QF_LRA" if all(k == "real" for k in kinds) else "QF_LIRA"
    lines = [f"(set-logic {logic})"]
    lines.extend(encode_model(m))
    term = property_to_term(phi, kinds)
    lines.append(f"(assert (not {term}))" if negate_property else f"(assert {term})")
    lines.extend(constraint_to_assertions(rho, kinds))
    lines.append("(check-sat)")
    x_symbols = tuple(_x_symbol(k) for k in range(m.n_features))
    tree_symbols = tuple(_tree_symbol(i) for i in range(1, len(m.trees) + 1))
    value_query = "(get-value (" + " ".join(x_symbols + ("y",)) + "))\n"
    return Query("\n".join(lines) + "\n", value_query, x_symbols, "y", tree_symbols)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sat:
    x: Point
    y: Fraction


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str  # "timeout" | "solver-said-unknown" | "io-failure"


SatResult = Union[Sat, Unsat, Unknown]


# ---------------------------------------------------------------------------
# Solver value parsing
# ---------------------------------------------------------------------------


def _tokenize_sexpr(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read_sexpr(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise SolverProtocolError("unexpected end of solver value output")
    token = tokens[pos]
    if token == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read_sexpr(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise SolverProtocolError("unbalanced parentheses in solver output")
        return items, pos + 1
    if token == ")":
        raise SolverProtocolError("unbalanced parentheses in solver output")
    return token, pos + 1


def parse_solver_value(value) -> Fraction:
    """Solver value syntax: integers, decimals, negation and quotients."""
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise SolverProtocolError(f"unparseable solver value {value!r}") from exc
    if isinstance(value, list) and value:
        head = value[0]
        if head == "-" and len(value) == 2:
            return -parse_solver_value(value[1])
        if head == "/" and len(value) == 3:
            return parse_solver_value(value[1]) / parse_solver_value(value[2])
        if head == "to_real" and len(value) == 2:
            return parse_solver_value(value[1])
    raise SolverProtocolError(f"unparseable solver value {value!r}")


def _parse_value_bindings(text: str) -> dict[str, Fraction]:
    tokens = _tokenize_sexpr(text)
    expr, _ = _read_sexpr(tokens, 0)
    if not isinstance(expr, list):
        raise SolverProtocolError(f"expected a binding list, got {expr!r}")
    bindings: dict[str, Fraction] = {}
    for pair in expr:
        if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str)):
            raise SolverProtocolError(f"malformed value binding {pair!r}")
        bindings[pair[0]] = parse_solver_value(pair[1])
    return bindings


def _parse_output(output: str) -> tuple[str, dict[str, Fraction] | None]:
    """Split raw solver output into a verdict and optional value bindings.

    Output after an "unsat"/"unknown" verdict is ignored (the value query
    is sent unconditionally and solvers answer it with a benign error when
    no model exists). Errors before any verdict are protocol failures.
    """
    lines = output.splitlines()
    verdict = None
    rest_start = 0
    for i, raw in enumerate(lines):
        line = raw.strip()
        if line in ("sat", "unsat", "unknown"):
            verdict = line
            rest_start = i + 1
            break
        if not line or line == "success" or line == "unsupported":
            continue
        if line.startswith("(error"):
            raise SolverProtocolError(f"solver error before verdict: {line}")
        raise SolverProtocolError(f"unexpected solver output: {line}")
    if verdict is None:
        if any(line.strip() for line in lines):
            raise SolverProtocolError(f"no sat/unsat/unknown verdict in solver output: {output[:200]!r}")
        return "io-failure", None
    if verdict != "sat":
        return verdict, None
    value_text = "\n".join(lines[rest_start:]).strip()
    if value_text.startswith("(error") or not value_text:
        raise SolverProtocolError(f"solver reported sat but returned no values: {value_text[:200]!r}")
    return "sat", _parse_value_bindings(value_text)


# ---------------------------------------------------------------------------
# Solver processes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """How to reach the SMT solver.

    `command` falls back to the TREE_SENTINEL_SOLVER environment variable
    and then to "z3 -in". Any solver that reads SMT-LIB v2 commands
    (one per line) from stdin and answers on stdout works.
    """

    command: str | tuple[str, ...] | None = None
    timeout: float = 60.0
    persistent: bool = False
    dump_dir: str | FsPath | None = None
    validate_models: bool = True

    def argv(self) -> tuple[str, ...]:
        command = self.command
        if command is None:
            command = os.environ.get(SOLVER_ENV_VAR) or DEFAULT_SOLVER_CMD
        if isinstance(command, str):
            return tuple(shlex.split(command))
        return tuple(command)


class _Session:
    """A long-lived solver process; each query is framed with (reset)."""

    def __init__(self, argv: tuple[str, ...]):
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except FileNotFoundError as exc:
            raise SolverNotFoundError(
                f"solver command not found: {argv[0]!r} (set {SOLVER_ENV_VAR} or pass --solver)"
            ) from exc
        self._buffer = b""

    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self) -> None:
        try:
            if self.proc.poll() is None:
                self.proc.kill()
            self.proc.wait(timeout=5)
        except Exception:
            pass

    def _read_line(self, deadline: float) -> bytes | None:
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = self._buffer[: newline + 1]
                self._buffer = self._buffer[newline + 1 :]
                return line
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([self.proc.stdout], [], [], min(remaining, 0.5))
            if not ready:
                continue
            chunk = os.read(self.proc.stdout.fileno(), 65536)
            if not chunk:
                raise EOFError
            self._buffer += chunk

    def request(self, payload: str, timeout: float) -> str | None:
        """Run one framed query; returns raw output, or None on timeout."""
        framed = "(reset)\n" + payload + f'(echo "{_SYNC_MARKER}")\n'
        try:
            self.proc.stdin.write(framed.encode("utf-8"))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            return ""
        deadline = time.monotonic() + timeout
        collected: list[bytes] = []
        while True:
            try:
                line = self._read_line(deadline)
            except EOFError:
                return b"".join(collected).decode("utf-8", "replace")
            if line is None:
                return None
            if line.strip() == _SYNC_MARKER.encode("utf-8"):
                return b"".join(collected).decode("utf-8", "replace")
            collected.append(line)


class Solver:
    """Issues queries and accumulates call statistics.

    In the default mode every check spawns a fresh solver process, so the
    reported call count equals the number of process invocations. With
    `persistent=True` one process is reused and each query is framed with
    (reset); semantics and call counting are identical.

    `deadline` (a time.monotonic() timestamp) is checked before each call;
    a spent budget raises BudgetExhaustedError without invoking the solver.
    """

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()
        self.calls = 0
        self.solver_time = 0.0
        self.deadline: float | None = None
        self._session: _Session | None = None
        self._dump_index = 0

    def __enter__(self) -> "Solver":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._session is not None:
            self._session.close()
            self._session = None

    def _dump(self, query: Query) -> None:
        if self.config.dump_dir is None:
            return
        directory = FsPath(self.config.dump_dir)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"query_{self._dump_index:04d}.smt2"
        path.write_text(query.script + query.value_query, encoding="utf-8")

    def _run_fresh(self, payload: str) -> str | None:
        try:
            proc = subprocess.Popen(
                self.config.argv(),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        except FileNotFoundError as exc:
            raise SolverNotFoundError(
                f"solver command not found: {self.config.argv()[0]!r} (set {SOLVER_ENV_VAR} or pass --solver)"
            ) from exc
        try:
            output, _ = proc.communicate(payload + "(exit)\n", timeout=self.config.timeout)
            return output
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
            return None

    def _run_persistent(self, payload: str) -> str | None:
        if self._session is None or not self._session.alive():
            if self._session is not None:
                self._session.close()
            self._session = _Session(self.config.argv())
        output = self._session.request(payload, self.config.timeout)
        if output is None:
            self._session.close()
            self._session = None
        return output

    def check(self, m: Ensemble, phi: Property, rho: ConstraintSet) -> SatResult:
        """Decide whether any admissible input violates the property.

        A Sat result is revalidated exactly (prediction, property, and
        constraint membership) before being returned; a mismatch raises
        EncodingBugError rather than propagating a wrong counterexample.
        """
        if self.deadline is not None and time.monotonic() >= self.deadline:
            raise BudgetExhaustedError("total verification budget exhausted")
        bind_property(phi, m.n_features)
        query = build_query(m, phi, rho)
        self._dump(query)
        self._dump_index += 1
        payload = query.script + query.value_query
        started = time.monotonic()
        try:
            if self.config.persistent:
                output = self._run_persistent(payload)
            else:
                output = self._run_fresh(payload)
        finally:
            self.solver_time += time.monotonic() - started
            self.calls += 1
        if output is None:
            return Unknown("timeout")
        verdict, bindings = _parse_output(output)
        if verdict == "io-failure":
            return Unknown("io-failure")
        if verdict == "unsat":
            return Unsat()
        if verdict == "unknown":
            return Unknown("solver-said-unknown")
        missing = [s for s in query.x_symbols + (query.y_symbol,) if s not in bindings]
        if missing:
            raise SolverProtocolError(f"solver model is missing values for {missing}")
        x = tuple(bindings[s] for s in query.x_symbols)
        y = bindings[query.y_symbol]
        if self.config.validate_models:
            self._validate(m, phi, rho, x, y)
        return Sat(x, y)

    @staticmethod
    def _validate(m: Ensemble, phi: Property, rho: ConstraintSet, x: Point, y: Fraction) -> None:
        for k, kind in enumerate(m.kinds):
            if kind == "integer" and x[k].denominator != 1:
                raise EncodingBugError(f"solver assigned non-integer {x[k]} to integer feature {k}")
        predicted = predict(m, x)
        if predicted != y:
            raise EncodingBugError(f"solver y={y} but the model predicts {predicted} for x={x}")
        if evaluate_property(phi, x, predicted):
            raise EncodingBugError(f"claimed counterexample x={x} actually satisfies the property")
        if not rho.admits(x):
            raise EncodingBugError(f"claimed counterexample x={x} violates the active constraints")


def check_sat(
    m: Ensemble, phi: Property, rho: ConstraintSet, config: SolverConfig | None = None
) -> SatResult:
    """One-shot satisfiability check with a transient solver."""
    with Solver(config) as solver:
        return solver.check(m, phi, rho)
