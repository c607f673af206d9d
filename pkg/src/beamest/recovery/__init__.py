"""Sparse channel recovery: OMP, ISTA, and the trainable unrolled network."""

from .dlista import (DlistaBatch, DlistaGrads, DlistaParams, dlista_forward,
                     dlista_gradients, dlista_loss, dlista_predict,
                     init_dlista_params, nmse_loss)
from .ista import (EffectiveOperator, IstaConfig, SparseEstimate,
                   grid_search_ista, ista, lasso_objective, operator_sq_norm,
                   soft_threshold)
from .metrics import NMSE_FLOOR_DB, nmse_batch_db, nmse_db
from .omp import OmpResult, omp
from .train import Adam, EpochMetrics, TrainConfig, split_dataset, train_dlista

__all__ = [
    "DlistaBatch", "DlistaGrads", "DlistaParams", "dlista_forward",
    "dlista_gradients", "dlista_loss", "dlista_predict", "init_dlista_params",
    "nmse_loss", "EffectiveOperator", "IstaConfig", "SparseEstimate",
    "grid_search_ista", "ista", "lasso_objective", "operator_sq_norm",
    "soft_threshold", "NMSE_FLOOR_DB", "nmse_batch_db", "nmse_db", "OmpResult",
    "omp", "Adam", "EpochMetrics", "TrainConfig", "split_dataset", "train_dlista",
]
