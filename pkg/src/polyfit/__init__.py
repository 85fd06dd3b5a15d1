"""Range aggregate indexes built from piecewise minimax polynomial fits."""

from .core import (
    AggregateKind,
    Dataset,
    ErrorSpec,
    Mode,
    Record,
    build_cum_array,
    build_max_tree,
    exact_max,
    exact_sum,
    ingest,
)
from .errors import (
    BadMagic,
    ChecksumMismatch,
    DegreeOutOfRange,
    EmptyInput,
    GuaranteeMismatch,
    InstanceTooLarge,
    InvalidRange,
    MaxDepthExceeded,
    NonFiniteValue,
    ParseError,
    PolyFitError,
    SchemaMismatch,
    SolverFailure,
    Truncated,
    VersionUnsupported,
)
from .fitting import PolyCoeffs, SurfaceCoeffs, fit_minimax_1d, fit_minimax_2d
from .index1d import (
    PolyIndex1D,
    QueryOutcome,
    Side,
    build_index,
    poly_max_on_range,
    query_max,
    query_sum,
    snap,
    tune,
)
from .index2d import Point2D, QuadIndex2D, build_quad_index, cf_count_2d, query_count_2d
from .io import deserialize, load_index, read_csv, save_index, serialize
from .segmentation import dp_oracle, greedy_segmentation, greedy_segmentation_exp
from .workload import generate_workload, make_dataset, make_points

__version__ = "0.1.0"
