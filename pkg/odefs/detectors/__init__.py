from typing import TYPE_CHECKING

from odefs.data import Dataset
from odefs.errors import ConfigError

from .base import OutlierDetector, PreparedRows, check_weights, indicator
from .lesinn import LesinnDetector, weighted_distance

if TYPE_CHECKING:
    from odefs.ensemble import OdefsParams

__all__ = [
    "LesinnDetector",
    "OutlierDetector",
    "PreparedRows",
    "check_weights",
    "indicator",
    "initiate_detector",
    "weighted_distance",
]


def initiate_detector(data: Dataset, params: "OdefsParams") -> OutlierDetector:
    """Build the detector named by ``params.detector`` over ``data``, seeded from ``params.seed``."""
    match params.detector:
        case "lesinn":
            return LesinnDetector.build(
                data, c=params.lesinn.c, subsample_size=params.lesinn.subsample_size, seed=params.seed
            )
        case _:
            raise ConfigError(f"unknown detector {params.detector!r}")
