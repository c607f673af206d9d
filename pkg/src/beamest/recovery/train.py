"""Mini-batch Adam training of the unrolled network, with early stopping.

Complex parameters are optimized as independent real/imag pairs (the complex
array is viewed as float64 pairs, matching the gradient convention). Weight
decay applies to the dictionary matrices only. Validation NMSE is evaluated
every epoch; the best parameters are kept and returned after the patience
budget is exhausted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..measure import MeasurementSet
from .dlista import DlistaBatch, DlistaParams, dlista_gradients, nmse_loss, _forward_batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    lr_gamma: float = 1e-2
    lr_theta: float = 1e-2
    lr_psi: float = 1e-3
    weight_decay: float = 1e-4  # on Psi matrices only
    patience: int = 20
    split: tuple[float, float, float] = (0.75, 0.08, 0.17)
    seed: int = 0
    normalize: bool = True
    freeze_psi: bool = False

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size and patience must be >= 1")


@dataclass
class EpochMetrics:
    epoch: int
    train_nmse_db: float
    val_nmse_db: float
    lr_gamma: float
    lr_theta: float
    lr_psi: float


Sample = tuple[MeasurementSet, np.ndarray]


def split_dataset(samples: list[Sample], ratios: tuple[float, float, float],
                  seed: int) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Seeded shuffle then (train, val, test) split; test takes the remainder."""
    if not samples:
        raise ValueError("empty dataset")
    idx = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(len(samples) * ratios[0])
    n_val = int(len(samples) * ratios[1])
    train = [samples[i] for i in idx[:n_train]]
    val = [samples[i] for i in idx[n_train:n_train + n_val]]
    test = [samples[i] for i in idx[n_train + n_val:]]
    return train, val, test


class Adam:
    """Bias-corrected Adam over a list of (array, grad-slot, lr) groups."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def step(self, updates: list[tuple[np.ndarray, np.ndarray, float]]):
        """Apply one update; complex arrays are treated as real pairs."""
        self.t += 1
        for slot, (param, grad, lr) in enumerate(updates):
            p = param.view(np.float64) if np.iscomplexobj(param) else param
            g = grad.view(np.float64) if np.iscomplexobj(grad) else grad
            if slot not in self._m:
                self._m[slot] = np.zeros_like(p)
                self._v[slot] = np.zeros_like(p)
            m, v = self._m[slot], self._v[slot]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _eval_batch_nmse(batch: DlistaBatch, params: DlistaParams) -> float:
    h_hat, _, _ = _forward_batch(batch, params, keep_cache=False)
    return nmse_loss(batch.h, h_hat)[0]


def train_dlista(train_samples: list[Sample], val_samples: list[Sample],
                 init: DlistaParams, cfg: TrainConfig):
    """Train a copy of ``init``; returns (best params, per-epoch metrics).

    Deterministic for a fixed config seed: batch order, Adam state and early
    stopping depend only on the inputs.
    """
    if not train_samples or not val_samples:
        raise ValueError("train and validation splits must be non-empty")
    params = init.copy()
    rng = np.random.default_rng(cfg.seed)

    train_batch_full = DlistaBatch.from_pairs(train_samples)
    val_batch = DlistaBatch.from_pairs(val_samples)
    if cfg.normalize:
        train_batch_full, _ = train_batch_full.normalized()
        val_batch, _ = val_batch.normalized()

    opt = Adam()
    best = params.copy()
    best_val = _eval_batch_nmse(val_batch, params)
    since_best = 0
    metrics: list[EpochMetrics] = []

    n = train_batch_full.size
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        train_losses = []
        for lo in range(0, n, cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            batch = DlistaBatch(y=train_batch_full.y[sel], w=train_batch_full.w[sel],
                                f=train_batch_full.f[sel], h=train_batch_full.h[sel])
            loss, grads = dlista_gradients(batch, params)
            train_losses.append(loss)

            updates = [(params.gamma, grads.gamma, cfg.lr_gamma),
                       (params.theta_raw, grads.theta_raw, cfg.lr_theta)]
            if not cfg.freeze_psi:
                for p, g in zip(params.psi_layers, grads.psi_layers):
                    updates.append((p, g + cfg.weight_decay * p, cfg.lr_psi))
                updates.append((params.psi_final,
                                grads.psi_final + cfg.weight_decay * params.psi_final,
                                cfg.lr_psi))
            else:
                # keep slot numbering stable so Adam state stays aligned
                for p in params.psi_layers:
                    updates.append((p, np.zeros_like(p), 0.0))
                updates.append((params.psi_final, np.zeros_like(params.psi_final), 0.0))
            opt.step(updates)

        val_nmse = _eval_batch_nmse(val_batch, params)
        metrics.append(EpochMetrics(epoch=epoch, train_nmse_db=float(np.mean(train_losses)),
                                    val_nmse_db=val_nmse, lr_gamma=cfg.lr_gamma,
                                    lr_theta=cfg.lr_theta, lr_psi=cfg.lr_psi))
        if val_nmse < best_val:
            best_val = val_nmse
            best = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return best, metrics


__all__ = ["TrainConfig", "EpochMetrics", "Adam", "split_dataset", "train_dlista"]
