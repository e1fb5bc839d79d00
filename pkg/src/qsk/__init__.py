"""qsk: deterministic eps-approximate quantile sketches on integer universes."""

from .core import (
    ContractViolation, DomainError, ExactOracle, Stream, cceil, exact_rank,
    log_star, stream_distance,
)
from .params import ParamSet, derive_params, n_star, validate_params
from .eager import EagerQDigest
from .layered import LayeredCore, QuantileSketch, compress_weights, round_partials
from .selectaug import SelectAugmented

__all__ = [
    "ContractViolation", "DomainError", "ExactOracle", "Stream",
    "cceil", "exact_rank", "log_star", "stream_distance",
    "ParamSet", "derive_params", "n_star", "validate_params",
    "EagerQDigest", "LayeredCore", "QuantileSketch",
    "compress_weights", "round_partials", "SelectAugmented",
]
