"""Unrolled soft-thresholding network with per-layer learnable parameters.

Each layer k applies, for a sample with observation y and sensing matrix Phi,

    r = y - Phi Psi_k z
    g = gamma_k (Phi Psi_k)^H r
    z <- eta_theta_k(z + g)

starting from z = 0, followed by channel synthesis h_hat = Psi_final z.
Thresholds are stored as softplus(theta_raw) so optimizers cannot drive them
negative. Training gradients are hand-derived reverse-mode (Wirtinger)
gradients through the unrolled graph; for every complex parameter the
returned gradient g has g.real = dL/d(Re) and g.imag = dL/d(Im), so central
finite differences on the real and imaginary parts check it directly.

The batched fast path requires rank-1 measurement blocks (one UE beam, one
gNB beam per measurement); the single-sample forward works with any
SensingMatrix via the generic operator form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..measure import MeasurementSet, apply_phi, apply_phi_adj
from .ista import soft_threshold

LN10 = float(np.log(10.0))


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y: float) -> float:
    """Inverse of softplus; y = 0 maps to -inf (a permanently dead threshold)."""
    if y < 0:
        raise ValueError("softplus values are non-negative")
    if y == 0:
        return -np.inf
    if y > 30.0:
        return float(y)
    return float(np.log(np.expm1(y)))


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


@dataclass
class DlistaParams:
    """Learnable parameters: per-layer (gamma, theta, Psi) plus final Psi.

    ``psi_layers`` holds one matrix per layer, or a single matrix used by all
    layers when ``shared_weights`` is set. ``psi_final`` is always separate.
    """

    gamma: np.ndarray            # (K,)
    theta_raw: np.ndarray        # (K,), thresholds are softplus(theta_raw)
    psi_layers: list[np.ndarray]  # K matrices, or 1 if shared
    psi_final: np.ndarray        # (dim, num atoms)
    shared_weights: bool = False

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.theta_raw = np.asarray(self.theta_raw, dtype=float)
        expected = 1 if self.shared_weights else self.num_layers
        if len(self.psi_layers) != expected:
            raise ValueError(f"expected {expected} layer matrices, got {len(self.psi_layers)}")

    @property
    def num_layers(self) -> int:
        return self.gamma.size

    @property
    def dim(self) -> int:
        return self.psi_final.shape[0]

    @property
    def num_atoms(self) -> int:
        return self.psi_final.shape[1]

    @property
    def theta(self) -> np.ndarray:
        return softplus(self.theta_raw)

    def psi_at(self, k: int) -> np.ndarray:
        return self.psi_layers[0 if self.shared_weights else k]

    def copy(self) -> "DlistaParams":
        return DlistaParams(gamma=self.gamma.copy(), theta_raw=self.theta_raw.copy(),
                            psi_layers=[p.copy() for p in self.psi_layers],
                            psi_final=self.psi_final.copy(),
                            shared_weights=self.shared_weights)


@dataclass
class DlistaGrads:
    """Gradient container mirroring DlistaParams' trainable storage."""

    gamma: np.ndarray
    theta_raw: np.ndarray
    psi_layers: list[np.ndarray]
    psi_final: np.ndarray


def init_dlista_params(psi0: np.ndarray, num_layers: int, shared_weights: bool = False,
                       gamma0: float = 1.0, theta0: float = 1e-2) -> DlistaParams:
    """Initialize all layer dictionaries (and the final one) from psi0."""
    psi0 = np.asarray(psi0, dtype=np.complex128)
    n_psi = 1 if shared_weights else num_layers
    raw = softplus_inv(theta0)
    return DlistaParams(
        gamma=np.full(num_layers, float(gamma0)),
        theta_raw=np.full(num_layers, raw),
        psi_layers=[psi0.copy() for _ in range(n_psi)],
        psi_final=psi0.copy(),
        shared_weights=shared_weights,
    )


# ---------------------------------------------------------------------------
# batching

@dataclass
class DlistaBatch:
    """Stacked rank-1 measurement batch: y, UE beams, gNB beams, targets."""

    y: np.ndarray  # (B, M)
    w: np.ndarray  # (B, M, num_rx) UE beams (unconjugated)
    f: np.ndarray  # (B, M, num_tx) gNB beams
    h: np.ndarray  # (B, num_rx*num_tx) vec'd true channels

    @property
    def size(self) -> int:
        return self.y.shape[0]

    @classmethod
    def from_pairs(cls, pairs: list[tuple[MeasurementSet, np.ndarray]]) -> "DlistaBatch":
        ys, ws, fs, hs = [], [], [], []
        for ms, h in pairs:
            if not ms.phi.rank1:
                raise ValueError("batched DLISTA requires rank-1 measurement blocks")
            ys.append(ms.y)
            ws.append(np.stack([a.conj().reshape(-1) for a, _ in ms.phi.blocks]))
            fs.append(np.stack([b.reshape(-1) for _, b in ms.phi.blocks]))
            hs.append(np.asarray(h).reshape(-1))
        return cls(y=np.stack(ys), w=np.stack(ws), f=np.stack(fs), h=np.stack(hs))

    def normalized(self) -> tuple["DlistaBatch", np.ndarray]:
        """Scale each sample's (y, h) by 1/||y||; returns the scales too."""
        scale = np.linalg.norm(self.y, axis=1)
        scale = np.where(scale > 0.0, scale, 1.0)
        return DlistaBatch(y=self.y / scale[:, None], w=self.w, f=self.f,
                           h=self.h / scale[:, None]), scale


def _unvec_batch(t: np.ndarray, num_rx: int, num_tx: int) -> np.ndarray:
    """(B, n) of column-major vecs -> (B, num_rx, num_tx)."""
    return t.reshape(t.shape[0], num_tx, num_rx).swapaxes(1, 2)


def _vec_batch(q: np.ndarray) -> np.ndarray:
    """(B, num_rx, num_tx) -> (B, n) column-major per sample."""
    return q.transpose(0, 2, 1).reshape(q.shape[0], -1)


def _measure_batch(w, f, x_mat):
    """vec(A_i X B_i) per sample/measurement for rank-1 blocks: w^H X f."""
    return np.einsum("bmx,bxy,bmy->bm", w.conj(), x_mat, f, optimize=True)


def _adjoint_batch(w, f, u):
    """Phi^H u per sample: sum_i u_i w_i f_i^H, as (B, num_rx, num_tx)."""
    return np.einsum("bm,bmx,bmy->bxy", u, w, f.conj(), optimize=True)


def _threshold_backward(u: np.ndarray, theta: float, lam_out: np.ndarray):
    """Cotangent pullback through complex magnitude shrinkage.

    For |u| > theta the map u -> u(1 - theta/|u|) has Wirtinger derivatives
    du = 1 - theta/(2|u|) and dconj = theta*u^2/(2|u|^3); the dead zone
    (including the kink |u| = theta) contributes zero. theta = 0 is the
    identity.
    """
    if theta == 0.0:
        return lam_out.copy(), 0.0
    mag = np.abs(u)
    active = mag > theta
    safe = np.where(active, mag, 1.0)
    a = np.where(active, 1.0 - theta / (2.0 * safe), 0.0)
    b = np.where(active, theta * u * u / (2.0 * safe ** 3), 0.0)
    lam_u = a * lam_out + b * np.conj(lam_out)
    dtheta = -float(np.sum(np.where(active,
                                    (lam_out * np.conj(u)).real / safe, 0.0)))
    return lam_u, dtheta


def _forward_batch(batch: DlistaBatch, params: DlistaParams, keep_cache: bool):
    num_rx, num_tx = batch.w.shape[2], batch.f.shape[2]
    bsz = batch.size
    z = np.zeros((bsz, params.num_atoms), dtype=np.complex128)
    theta = params.theta
    cache = []
    for k in range(params.num_layers):
        psi = params.psi_at(k)
        t = z @ psi.T
        ypred = _measure_batch(batch.w, batch.f, _unvec_batch(t, num_rx, num_tx))
        resid = batch.y - ypred
        qv = _vec_batch(_adjoint_batch(batch.w, batch.f, resid))
        s = qv @ psi.conj()
        u = z + params.gamma[k] * s
        z_next = soft_threshold(u, float(theta[k]))
        if keep_cache:
            cache.append((z, u, qv, s))
        z = z_next
    h_hat = z @ params.psi_final.T
    return h_hat, z, cache


def nmse_loss(h_true: np.ndarray, h_hat: np.ndarray):
    """Batch NMSE loss (dB) and its cotangent w.r.t. h_hat.

    Samples with zero-norm truth contribute zero ratio and zero gradient; a
    fully degenerate batch returns the -300 dB floor. Non-finite inputs raise.
    """
    denom = np.sum(np.abs(h_true) ** 2, axis=1)
    err = h_true - h_hat
    e = np.sum(np.abs(err) ** 2, axis=1)
    ok = denom > 0.0
    ratio = np.where(ok, e / np.where(ok, denom, 1.0), 0.0)
    mu = float(np.mean(ratio))
    if not np.isfinite(mu):
        raise ValueError(f"non-finite loss (mu={mu}); batch ratios: {ratio}")
    bsz = h_true.shape[0]
    if mu <= 1e-30:
        return -300.0, np.zeros_like(h_hat)
    loss = 10.0 * np.log10(mu)
    coef = -20.0 / (bsz * mu * LN10)
    lam = coef * err / np.where(ok, denom, 1.0)[:, None]
    lam[~ok] = 0.0
    return float(loss), lam


def dlista_loss(batch: DlistaBatch, params: DlistaParams) -> float:
    h_hat, _, _ = _forward_batch(batch, params, keep_cache=False)
    return nmse_loss(batch.h, h_hat)[0]


def dlista_gradients(batch: DlistaBatch, params: DlistaParams):
    """Batch NMSE loss and gradients for every parameter group.

    In shared-weights mode the per-layer Psi contributions are summed into
    the single shared matrix slot, matching the aliased storage.
    """
    num_rx, num_tx = batch.w.shape[2], batch.f.shape[2]
    h_hat, z_final, cache = _forward_batch(batch, params, keep_cache=True)
    loss, lam_h = nmse_loss(batch.h, h_hat)

    k_layers = params.num_layers
    g_gamma = np.zeros(k_layers)
    g_theta_raw = np.zeros(k_layers)
    g_psi = [np.zeros_like(p) for p in params.psi_layers]
    theta = params.theta
    sig = sigmoid(params.theta_raw)

    g_psi_final = np.einsum("bi,bj->ij", lam_h, z_final.conj(), optimize=True)
    lam_z = lam_h @ params.psi_final.conj()

    for k in range(k_layers - 1, -1, -1):
        z_in, u, qv, s = cache[k]
        psi = params.psi_at(k)
        slot = 0 if params.shared_weights else k

        lam_u, dtheta = _threshold_backward(u, float(theta[k]), lam_z)
        g_theta_raw[k] = dtheta * sig[k]

        lam_g = lam_u
        lam_z = lam_u.copy()  # direct path through u = z + g

        g_gamma[k] = float(np.sum((lam_g * s.conj()).real))
        lam_q = params.gamma[k] * (lam_g @ psi.T)
        g_psi[slot] += params.gamma[k] * np.einsum("bi,bj->ij", qv, lam_g.conj(),
                                                   optimize=True)

        lam_r = _measure_batch(batch.w, batch.f, _unvec_batch(lam_q, num_rx, num_tx))
        lam_t = _vec_batch(_adjoint_batch(batch.w, batch.f, -lam_r))
        g_psi[slot] += np.einsum("bi,bj->ij", lam_t, z_in.conj(), optimize=True)
        lam_z += lam_t @ psi.conj()

    return loss, DlistaGrads(gamma=g_gamma, theta_raw=g_theta_raw,
                             psi_layers=g_psi, psi_final=g_psi_final)


# ---------------------------------------------------------------------------
# single-sample reference path (any SensingMatrix)

def dlista_forward(ms: MeasurementSet, params: DlistaParams,
                   return_trace: bool = False):
    """Reference forward pass for one measurement set (generic blocks).

    Returns the synthesized channel estimate, optionally with the per-layer
    sparse iterates.
    """
    z = np.zeros(params.num_atoms, dtype=np.complex128)
    theta = params.theta
    trace = []
    for k in range(params.num_layers):
        psi = params.psi_at(k)
        resid = ms.y - apply_phi(ms.phi, psi @ z)
        g = params.gamma[k] * (psi.conj().T @ apply_phi_adj(ms.phi, resid))
        z = soft_threshold(z + g, float(theta[k]))
        if return_trace:
            trace.append(z.copy())
    h_hat = params.psi_final @ z
    return (h_hat, trace) if return_trace else h_hat


def dlista_predict(pairs: list[tuple[MeasurementSet, np.ndarray]],
                   params: DlistaParams, normalize: bool = True) -> np.ndarray:
    """Channel estimates for a list of samples, undoing ||y|| normalization."""
    batch = DlistaBatch.from_pairs(pairs)
    if normalize:
        batch, scale = batch.normalized()
    else:
        scale = np.ones(batch.size)
    h_hat, _, _ = _forward_batch(batch, params, keep_cache=False)
    return h_hat * scale[:, None]


__all__ = [
    "DlistaParams", "DlistaGrads", "DlistaBatch", "init_dlista_params",
    "dlista_forward", "dlista_gradients", "dlista_predict", "dlista_loss",
    "nmse_loss", "softplus", "softplus_inv", "sigmoid",
]
