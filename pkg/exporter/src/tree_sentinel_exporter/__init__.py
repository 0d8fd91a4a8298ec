"""Export trained tree ensembles to the tree-sentinel canonical format."""

from .export import (
    PARITY_TOLERANCE,
    ExporterError,
    ExportResult,
    ParityError,
    UnsupportedModelError,
    convert_xgboost_dump,
    export_model,
    predict_document,
)

__version__ = "0.1.0"
