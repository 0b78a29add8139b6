"""Small-area financial-exclusion index: cash-access scoring, loneliness,
composite index construction, validation and intervention scenarios."""

from finex.errors import (
    FinexError,
    InfeasibleClassingError,
    InsufficientPointsError,
    InvalidConfigError,
    InvalidParameterError,
    MissingBaselineError,
    MissingLookupError,
    SchemaError,
    WardSetMismatchError,
)
from finex.geometry import ProjPoint, StudyArea
from finex.infrastructure import InfraKind, InfrastructurePoint, ScoreTable
from finex.composite import WeightScheme

__version__ = "0.1.0"

__all__ = [
    "FinexError",
    "InfeasibleClassingError",
    "InsufficientPointsError",
    "InvalidConfigError",
    "InvalidParameterError",
    "MissingBaselineError",
    "MissingLookupError",
    "SchemaError",
    "WardSetMismatchError",
    "ProjPoint",
    "StudyArea",
    "InfraKind",
    "InfrastructurePoint",
    "ScoreTable",
    "WeightScheme",
]
