from odefs.data import Dataset, SyntheticSpec, generate_synthetic, load_csv, minmax_normalize
from odefs.ensemble import EnsembleModel, OdefsParams, run_bare, run_odefs, run_odefs_async
from odefs.metrics import auc, precision_at_k

__all__ = [
    "Dataset",
    "EnsembleModel",
    "OdefsParams",
    "SyntheticSpec",
    "auc",
    "generate_synthetic",
    "load_csv",
    "minmax_normalize",
    "precision_at_k",
    "run_bare",
    "run_odefs",
    "run_odefs_async",
]
