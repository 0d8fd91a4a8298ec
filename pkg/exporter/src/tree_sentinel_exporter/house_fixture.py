"""Train and export the 100-tree depth-3 house-price booster fixture.

The feature layout mirrors a typical house-price table (grade, condition,
bedrooms and four square-footage columns, all integer-valued), but the
rows are synthetic: a seeded linear signal with interactions and noise.
The real public dataset is not vendored; the manifest records this
provenance so nobody mistakes the fixture for the original.

Usage:  python -m tree_sentinel_exporter.house_fixture OUT_DIR
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from sklearn.ensemble import GradientBoostingRegressor

from .export import export_model

FEATURES = [
    ("grade", 1, 13),
    ("condition", 1, 5),
    ("bedrooms", 0, 11),
    ("sqft_living", 290, 13540),
    ("sqft_parking", 0, 9410),
    ("sqft_ground", 290, 9410),
    ("sqft_basement", 0, 4820),
]

PROVENANCE = (
    "Trained on synthetic house-price-like data (seeded generator in "
    "tree_sentinel_exporter.house_fixture), not on the public sales dataset."
)


def make_dataset(seed: int = 7, rows: int = 4000):
    rng = np.random.RandomState(seed)
    columns = [rng.randint(low, high + 1, size=rows) for _, low, high in FEATURES]
    X = np.column_stack(columns).astype(np.float64)
    grade, condition, bedrooms, living, parking, ground, basement = (X[:, i] for i in range(7))
    price = (
        40000.0
        + 28000.0 * grade
        + 9000.0 * condition
        + 6000.0 * bedrooms
        + 55.0 * living
        + 8.0 * parking
        + 22.0 * ground
        + 15.0 * basement
        + 0.004 * living * grade
        + rng.normal(0.0, 25000.0, size=rows)
    )
    return X, price


def build_fixture(seed: int = 7):
    X, y = make_dataset(seed)
    booster = GradientBoostingRegressor(
        n_estimators=100, max_depth=3, learning_rate=0.1, random_state=seed
    ).fit(X, y)
    names = [name for name, _, _ in FEATURES]
    kinds = ["integer"] * len(FEATURES)
    bounds = [(low, high) for _, low, high in FEATURES]
    return export_model(
        booster,
        names,
        kinds,
        parity_samples=1000,
        seed=seed,
        bounds=bounds,
        provenance=PROVENANCE,
    )


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m tree_sentinel_exporter.house_fixture OUT_DIR", file=sys.stderr)
        return 2
    out_dir = Path(argv[0])
    out_dir.mkdir(parents=True, exist_ok=True)
    result = build_fixture()
    (out_dir / "house_gbr_100x3.model.json").write_bytes(result.model_bytes())
    (out_dir / "house_gbr_100x3.manifest.json").write_bytes(result.manifest_bytes())
    deviation = result.manifest["parity"]["max_abs_deviation"]
    print(f"wrote house_gbr_100x3 fixture (parity max abs deviation {deviation:.3e})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
