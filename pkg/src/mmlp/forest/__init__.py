from .core import (
    Forest,
    ForestConfig,
    Tree,
    block_assignment,
    default_threads,
    fit_forest,
    oob_rmse,
    oob_rmse_from,
    predict,
    predict_oob,
)

__all__ = [
    "Forest",
    "ForestConfig",
    "Tree",
    "block_assignment",
    "default_threads",
    "fit_forest",
    "oob_rmse",
    "oob_rmse_from",
    "predict",
    "predict_oob",
]
