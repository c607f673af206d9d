"""Iterative soft-thresholding over a grid or learned dictionary.

The iterate is the proximal-gradient step

    z <- eta_theta( z + gamma * (Phi Psi)^H (y - Phi Psi z) ),

which for gamma <= 1/||Phi Psi||^2 monotonically decreases the objective
0.5*||y - Phi Psi z||^2 + (theta/gamma)*||z||_1. The shrinkage eta_theta
acts on magnitudes and keeps phases (the real-axis restriction recovers
ReLU(x - theta) - ReLU(-x - theta)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..measure import MeasurementSet, apply_phi, apply_phi_adj
from .metrics import nmse_batch_db


@dataclass(frozen=True)
class IstaConfig:
    step: float
    threshold: float
    iterations: int

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class SparseEstimate:
    """Sparse coefficients plus the dictionary they refer to."""

    support: np.ndarray
    coeffs: np.ndarray
    dictionary: object
    num_atoms: int

    def dense(self) -> np.ndarray:
        z = np.zeros(self.num_atoms, dtype=np.complex128)
        z[self.support] = self.coeffs
        return z

    def channel_vec(self) -> np.ndarray:
        """Synthesize the channel estimate Psi z."""
        return self.dictionary.apply(self.dense())


def soft_threshold(x, theta: float):
    """Complex magnitude shrinkage x * max(1 - theta/|x|, 0), with 0 -> 0."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    x = np.asarray(x)
    mag = np.abs(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(mag > 0.0, np.maximum(1.0 - theta / np.maximum(mag, 1e-300), 0.0), 0.0)
    out = x * scale
    return out if out.ndim else out[()]


class EffectiveOperator:
    """E = Phi Psi as a pair of matvec closures (never densified by default)."""

    def __init__(self, phi, dictionary):
        self.phi = phi
        self.dictionary = dictionary
        self.num_atoms = dictionary.num_atoms
        self.rows = phi.rows

    def apply(self, z: np.ndarray) -> np.ndarray:
        return apply_phi(self.phi, self.dictionary.apply(z))

    def apply_adj(self, v: np.ndarray) -> np.ndarray:
        return self.dictionary.apply_adj(apply_phi_adj(self.phi, v))


def operator_sq_norm(op: EffectiveOperator, iterations: int = 30,
                     seed: int = 0) -> float:
    """Power-iteration estimate of ||E||^2 (largest eigenvalue of E^H E)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.num_atoms) + 1j * rng.standard_normal(op.num_atoms)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = op.apply_adj(op.apply(v))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def lasso_objective(y: np.ndarray, op: EffectiveOperator, z: np.ndarray,
                    lam: float) -> float:
    """0.5*||y - E z||^2 + lam*||z||_1 (lam = theta/step for the ISTA iterate)."""
    resid = y - op.apply(z)
    return float(0.5 * np.vdot(resid, resid).real + lam * np.sum(np.abs(z)))


def ista(ms: MeasurementSet, dictionary, cfg: IstaConfig,
         return_trace: bool = False, check_step: bool = True):
    """Run the soft-thresholding iteration from z = 0.

    Warns (does not fail) when the step exceeds the power-iteration estimate
    of 1/||E||^2, since monotonicity is then no longer guaranteed;
    ``check_step=False`` skips the estimate (grid search does its own).
    """
    op = EffectiveOperator(ms.phi, dictionary)
    if check_step:
        sq = operator_sq_norm(op)
        if sq > 0 and cfg.step > 1.0 / sq * (1 + 1e-9):
            warnings.warn(f"ISTA step {cfg.step:.3g} exceeds 1/||E||^2 = {1.0 / sq:.3g}; "
                          "descent is not guaranteed", RuntimeWarning, stacklevel=2)

    z = np.zeros(op.num_atoms, dtype=np.complex128)
    trace = []
    lam = cfg.threshold / cfg.step if cfg.step > 0 else 0.0
    for _ in range(cfg.iterations):
        resid = ms.y - op.apply(z)
        z = soft_threshold(z + cfg.step * op.apply_adj(resid), cfg.threshold)
        if return_trace:
            trace.append(lasso_objective(ms.y, op, z, lam))

    support = np.flatnonzero(z)
    est = SparseEstimate(support=support, coeffs=z[support], dictionary=dictionary,
                         num_atoms=op.num_atoms)
    return (est, trace) if return_trace else est


def grid_search_ista(samples: list[tuple[MeasurementSet, np.ndarray]], dictionary,
                     step_grid, theta_grid, iterations: int) -> IstaConfig:
    """Pick (step, threshold) minimizing batch NMSE over the given samples.

    Scan order is deterministic (steps outer, thresholds inner); strict
    improvement keeps the earliest minimizer on ties.
    """
    steps = list(step_grid)
    thetas = list(theta_grid)
    if not steps or not thetas:
        raise ValueError("grids must be non-empty")
    best_cfg = None
    best_nmse = np.inf
    h_true = np.stack([h for _, h in samples])
    for step in steps:
        for theta in thetas:
            cfg = IstaConfig(step=step, threshold=theta, iterations=iterations)
            h_hat = np.stack([ista(ms, dictionary, cfg, check_step=False).channel_vec()
                              for ms, _ in samples])
            val = nmse_batch_db(h_true, h_hat)
            if val < best_nmse:
                best_nmse = val
                best_cfg = cfg
    return best_cfg


__all__ = [
    "IstaConfig", "SparseEstimate", "soft_threshold", "EffectiveOperator",
    "operator_sq_norm", "lasso_objective", "ista", "grid_search_ista",
]
