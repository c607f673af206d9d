"""Normalized mean squared error in dB."""

from __future__ import annotations

import numpy as np

NMSE_FLOOR_DB = -120.0


def nmse_db(h_true: np.ndarray, h_hat: np.ndarray,
            floor_db: float | None = NMSE_FLOOR_DB) -> float:
    """Per-sample NMSE: 10*log10(||h - h_hat||^2 / ||h||^2).

    Exact recovery gives -inf; ``floor_db`` clips it for plotting (pass None
    to keep the sentinel). Zero-norm truth is an error (exclude upstream).
    """
    h_true = np.asarray(h_true).reshape(-1)
    h_hat = np.asarray(h_hat).reshape(-1)
    if h_true.shape != h_hat.shape:
        raise ValueError("shape mismatch")
    denom = float(np.vdot(h_true, h_true).real)
    if denom <= 0.0:
        raise ValueError("reference has zero norm")
    err = h_true - h_hat
    mu = float(np.vdot(err, err).real) / denom
    with np.errstate(divide="ignore"):
        val = 10.0 * np.log10(mu)
    if floor_db is not None:
        val = max(val, floor_db)
    return float(val)


def nmse_batch_db(h_true: np.ndarray, h_hat: np.ndarray,
                  floor_db: float | None = NMSE_FLOOR_DB) -> float:
    """Batch NMSE: 10*log10 of the mean over samples of the energy ratio.

    Inputs are (num samples, dim) stacks.
    """
    h_true = np.atleast_2d(np.asarray(h_true))
    h_hat = np.atleast_2d(np.asarray(h_hat))
    if h_true.shape != h_hat.shape:
        raise ValueError("shape mismatch")
    denom = np.sum(np.abs(h_true) ** 2, axis=1)
    if np.any(denom <= 0.0):
        raise ValueError("a reference sample has zero norm")
    mu = float(np.mean(np.sum(np.abs(h_true - h_hat) ** 2, axis=1) / denom))
    with np.errstate(divide="ignore"):
        val = 10.0 * np.log10(mu)
    if floor_db is not None:
        val = max(val, floor_db)
    return float(val)


__all__ = ["nmse_db", "nmse_batch_db", "NMSE_FLOOR_DB"]
