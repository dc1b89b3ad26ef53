"""Query-adaptive deep weighted hashing at desk scale.

Trains binary hash functions together with per-class bit weights, then
ranks a packed code database by query-adaptive weighted Hamming distance.
"""

from .errors import (
    DimensionError,
    DivergenceError,
    EmptyInputError,
    NoLabelError,
    NumericError,
    ParseError,
    QadwhError,
    RangeError,
    SamplingError,
)
from .index import (
    BitCodeSet,
    RankedList,
    build_index,
    hamming_distance,
    query_weights,
    rank_exact,
    rank_hamming,
    rank_two_phase,
    retrieve,
    weighted_hamming,
)
from .model import Dataset, ModelParams, init_params
from .scan import BACKEND as SCAN_BACKEND
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"
