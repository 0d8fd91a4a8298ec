"""tree-sentinel: SMT-backed verification of decision-tree ensembles and
extraction of violation ranges for input filtering."""

from .detector import (
    DetectionReport,
    Parameters,
    Totals,
    detect_violation_ranges,
    filter_check,
    format_report_table,
    report_to_dict,
)
from .division import DivisionAborted, DivisionOutcome, calc_volume_sum, continue_division, range_division
from .extraction import (
    ExtractionAborted,
    ExtractionResult,
    Margin,
    expand,
    mgn,
    range_extraction,
)
from .geometry import (
    Bound,
    Box,
    Interval,
    Plane,
    box_from_json,
    box_to_json,
    calc_planes,
    closed_box,
    contains,
    hypervolume,
    intersection,
    point_box,
    slice_box,
)
from .model import (
    Ensemble,
    FeatureSpec,
    LeafNode,
    ModelFormatError,
    Path,
    SplitNode,
    Tree,
    dump_model,
    enumerate_paths,
    load_model,
    predict,
)
from .oracle import CoverageReport, GridSpec, OracleError, brute_force_violations, coverage_check
from .properties import (
    And,
    Atom,
    Implies,
    Not,
    Or,
    Property,
    PropertyBindError,
    PropertySyntaxError,
    bind_property,
    evaluate_property,
    parse_property,
)
from .smt import (
    BudgetExhaustedError,
    ConstraintSet,
    EncodingBugError,
    Query,
    Sat,
    SatResult,
    Solver,
    SolverConfig,
    SolverError,
    SolverNotFoundError,
    SolverProtocolError,
    Unknown,
    Unsat,
    build_query,
    check_sat,
    encode_model,
)

__version__ = "0.1.0"
