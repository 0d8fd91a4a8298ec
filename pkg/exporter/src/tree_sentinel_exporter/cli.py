"""Command-line exporter.

    tree-sentinel-export sklearn --estimator model.joblib \
        --names grade,condition --kinds integer,integer \
        --out model.json --manifest manifest.json

    tree-sentinel-export xgb-dump --dump dump.json \
        --names f0,f1 --kinds real,real --mode sum --base-score 0.5 \
        --out model.json
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import joblib

from .export import ExporterError, convert_xgboost_dump, export_model


def _split_csv(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def cmd_sklearn(args) -> int:
    estimator = joblib.load(args.estimator)
    names, kinds = _split_csv(args.names), _split_csv(args.kinds)
    bounds = None
    if args.bounds:
        pairs = _split_csv(args.bounds)
        bounds = [tuple(float(v) for v in pair.split(":")) for pair in pairs]
    result = export_model(
        estimator,
        names,
        kinds,
        parity_samples=args.parity_samples,
        seed=args.seed,
        bounds=bounds,
        provenance=args.provenance,
    )
    Path(args.out).write_bytes(result.model_bytes())
    if args.manifest:
        Path(args.manifest).write_bytes(result.manifest_bytes())
    deviation = result.manifest["parity"]["max_abs_deviation"]
    print(f"exported {result.manifest['n_est']} tree(s); parity max abs deviation {deviation:.3e}")
    return 0


def cmd_xgb_dump(args) -> int:
    # parse_float=str keeps the dump's decimal text exact.
    dump = json.loads(Path(args.dump).read_text(encoding="utf-8"), parse_float=str)
    document = convert_xgboost_dump(
        dump,
        _split_csv(args.names),
        _split_csv(args.kinds),
        mode=args.mode,
        base_score=args.base_score,
    )
    Path(args.out).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    print(f"converted {len(document['trees'])} tree(s) (no parity check for dump conversions)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tree-sentinel-export")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sk = sub.add_parser("sklearn", help="export a fitted scikit-learn regressor (joblib file)")
    p_sk.add_argument("--estimator", required=True, help="joblib file with the fitted estimator")
    p_sk.add_argument("--names", required=True, help="comma-separated feature names")
    p_sk.add_argument("--kinds", required=True, help="comma-separated feature kinds (real|integer)")
    p_sk.add_argument("--out", required=True)
    p_sk.add_argument("--manifest")
    p_sk.add_argument("--parity-samples", type=int, default=1000)
    p_sk.add_argument("--seed", type=int, default=0)
    p_sk.add_argument("--bounds", help="comma-separated low:high pairs for parity sampling")
    p_sk.add_argument("--provenance", default="")
    p_sk.set_defaults(func=cmd_sklearn)

    p_xgb = sub.add_parser("xgb-dump", help="convert a classic XGBoost JSON dump (no parity check)")
    p_xgb.add_argument("--dump", required=True)
    p_xgb.add_argument("--names", required=True)
    p_xgb.add_argument("--kinds", required=True)
    p_xgb.add_argument("--mode", required=True, choices=["sum", "average"])
    p_xgb.add_argument("--base-score", required=True)
    p_xgb.add_argument("--out", required=True)
    p_xgb.set_defaults(func=cmd_xgb_dump)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
