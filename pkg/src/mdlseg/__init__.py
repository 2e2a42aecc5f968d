"""Multiple changepoint segmentation of periodic, autocorrelated series by MDL."""

from .core import (
    FittedModel,
    MdlsegError,
    MeanParams,
    PARModel,
    PeriodicSeries,
    Segmentation,
    validate_series,
)
from .mdl import MdlVariant, mdl_score
from .regression import cochrane_orcutt

__all__ = [
    "FittedModel",
    "MdlsegError",
    "MdlVariant",
    "MeanParams",
    "PARModel",
    "PeriodicSeries",
    "Segmentation",
    "cochrane_orcutt",
    "mdl_score",
    "validate_series",
]
