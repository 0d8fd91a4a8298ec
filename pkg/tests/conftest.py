from __future__ import annotations

import os
import random
import shutil
from pathlib import Path

import pytest

from tree_sentinel.smt import SOLVER_ENV_VAR, Solver, SolverConfig
from tree_sentinel.synth import random_ensemble, random_property
from tree_sentinel.properties import parse_property

REPO_ROOT = Path(__file__).resolve().parents[1]
WASM_WRAPPER = REPO_ROOT / "tools" / "z3wasm" / "z3cli.mjs"


def _resolve_solver_command() -> str | None:
    env = os.environ.get(SOLVER_ENV_VAR)
    if env:
        return env
    if shutil.which("z3"):
        return "z3 -in"
    if WASM_WRAPPER.exists() and shutil.which("node"):
        if (WASM_WRAPPER.parent / "node_modules" / "z3-solver").exists():
            return f"node {WASM_WRAPPER}"
    return None


def pytest_configure(config):
    command = _resolve_solver_command()
    if command is None:
        pytest.exit(
            "No SMT solver available. Install z3 on PATH, or run "
            "`npm ci` inside tools/z3wasm/ to set up the bundled WASM build, "
            f"or point {SOLVER_ENV_VAR} at an SMT-LIB v2 solver command.",
            returncode=3,
        )
    # Exported so CLI subprocesses under test resolve the same solver.
    os.environ[SOLVER_ENV_VAR] = command


@pytest.fixture(scope="session")
def solver_command() -> str:
    return os.environ[SOLVER_ENV_VAR]


@pytest.fixture(scope="session")
def solver(solver_command):
    """One persistent solver session shared by the whole suite.

    Persistence is the documented opt-in optimization: every query is a
    self-contained (reset)-framed script, so results and per-call counting
    are identical to the default one-process-per-call mode.
    """
    with Solver(SolverConfig(command=solver_command, timeout=60.0, persistent=True)) as s:
        yield s


@pytest.fixture(scope="session")
def oracle_corpus():
    """Seeded random ensembles over small all-integer domains.

    1 to 5 trees, depth at most 3, 1 to 3 features, at most 11 integer
    values per dimension: small enough for exhaustive enumeration to act
    as ground truth.
    """
    corpus = []
    for i in range(120):
        rng = random.Random(1000 + i)
        n_trees = rng.randint(1, 5)
        depth = rng.randint(1, 3)
        s = rng.randint(1, 3)
        m, domain = random_ensemble(rng, n_trees, depth, s, kind="integer", low=0, high=10)
        text = random_property(rng, m, low=0, high=10)
        corpus.append((m, domain, text, parse_property(text)))
    return corpus


@pytest.fixture(scope="session")
def detection_corpus(oracle_corpus):
    """Corpus for full detection runs: random ensembles plus constructed
    models whose non-convex violating regions exercise no-violation-range
    recording and range division."""
    from helpers import cross_model_2d, t_down_model_2d, t_shape_model_2d
    from tree_sentinel.geometry import closed_box

    shaped = []
    for model in (t_shape_model_2d(), t_down_model_2d(), cross_model_2d()):
        text = "y > 0"
        shaped.append((model, closed_box([(0, 10), (0, 10)]), text, parse_property(text)))
    return list(oracle_corpus[:30]) + shaped

