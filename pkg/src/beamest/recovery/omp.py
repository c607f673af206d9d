"""Orthogonal matching pursuit over the angular-grid dictionary.

Greedy per-tap recovery: pick the grid atom whose sensed image correlates
most with the residual, extract its angle quadruple, refit coefficients,
subtract, repeat. The effective sensing columns factor per side,

    Phi psi_(l,j) per block i = (B_i^T conj(p_tx_j)) kron (A_i p_rx_l),

so both the correlation map and the column norms are computed from two small
per-side matrices instead of the full atom set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import ChannelTap, steering_vector
from ..dictionary import GridDictionary
from ..measure import MeasurementSet, apply_phi, apply_phi_adj


@dataclass
class OmpResult:
    """Selected quadruples/gains, synthesized channel, residual history."""

    quadruples: list[tuple[float, float, float, float]]
    atom_indices: list[int]
    gains: np.ndarray
    estimated_channel: ChannelTap
    residual_norm: float
    residual_trace: list[float] = field(default_factory=list)

    @property
    def num_paths(self) -> int:
        return len(self.quadruples)


def _side_products(ms: MeasurementSet, dictionary: GridDictionary):
    """Per-block side images (A_i P_R, B_i^T conj(P_T)) stacked over blocks."""
    p_rx, p_tx = dictionary.steering_matrices()
    rx_im = [a @ p_rx for a, _ in ms.phi.blocks]          # (n_ue_rf, G_R) each
    tx_im = [b.T @ p_tx.conj() for _, b in ms.phi.blocks]  # (n_nb_rf, G_T) each
    return rx_im, tx_im


def _column_norms_sq(rx_im, tx_im) -> np.ndarray:
    """||Phi psi_(l,j)||^2 as a (G_R, G_T) table (norms factor per side)."""
    g_r = rx_im[0].shape[1]
    g_t = tx_im[0].shape[1]
    out = np.zeros((g_r, g_t))
    for r_i, t_i in zip(rx_im, tx_im):
        out += np.outer(np.sum(np.abs(r_i) ** 2, axis=0),
                        np.sum(np.abs(t_i) ** 2, axis=0))
    return out


def omp(ms: MeasurementSet, dictionary: GridDictionary, max_iters: int = 8,
        residual_tol: float = 1e-8, normalize_columns: bool = True,
        literal_coeffs: bool = False) -> OmpResult:
    """Greedy sparse recovery of one channel tap from beamformed measurements.

    Default mode refits all coefficients by least squares every iteration
    (monotone residual, no atom reselected); ``literal_coeffs`` switches to
    the plain adjoint update x = (Phi Psi_sel)^H y. ``normalize_columns``
    scales correlations by the effective column norms so beamforming-gain
    disparities do not bias atom selection.
    """
    y = ms.y
    y_norm = float(np.linalg.norm(y))
    rx_geom, tx_geom = dictionary.rx_geom, dictionary.tx_geom
    if y_norm == 0.0:
        return OmpResult(quadruples=[], atom_indices=[],
                         gains=np.zeros(0, dtype=np.complex128),
                         estimated_channel=ChannelTap(
                             tap=ms.tap,
                             matrix=np.zeros((rx_geom.num_elements,
                                              tx_geom.num_elements))),
                         residual_norm=0.0, residual_trace=[0.0])

    rx_im, tx_im = _side_products(ms, dictionary)
    norms = np.sqrt(_column_norms_sq(rx_im, tx_im)) if normalize_columns else None
    g_r = dictionary.grid.ue_size

    selected: list[int] = []
    sense_cols: list[np.ndarray] = []
    resid = y.copy()
    trace = [y_norm]
    coeffs = np.zeros(0, dtype=np.complex128)

    for _ in range(max_iters):
        corr = dictionary.apply_adj(apply_phi_adj(ms.phi, resid))
        score = np.abs(corr)
        if norms is not None:
            with np.errstate(invalid="ignore", divide="ignore"):
                score = np.where(norms.reshape(-1, order="F") > 1e-12,
                                 score / norms.reshape(-1, order="F"), 0.0)
        if not literal_coeffs and selected:
            score[selected] = -1.0  # guards reselection against roundoff
        idx = int(np.argmax(score))
        selected.append(idx)
        sense_cols.append(apply_phi(ms.phi, dictionary.atom(idx)))

        s_mat = np.stack(sense_cols, axis=1)
        if literal_coeffs:
            coeffs = s_mat.conj().T @ y
        else:
            coeffs, *_ = np.linalg.lstsq(s_mat, y, rcond=None)
        resid = y - s_mat @ coeffs
        trace.append(float(np.linalg.norm(resid)))
        if trace[-1] / y_norm <= residual_tol:
            break

    quadruples = [dictionary.grid.decode(i) for i in selected]
    h = np.zeros((rx_geom.num_elements, tx_geom.num_elements), dtype=np.complex128)
    for (aoa_az, aoa_zen, aod_az, aod_zen), g in zip(quadruples, coeffs):
        p_rx = steering_vector(rx_geom, aoa_az, aoa_zen)
        p_tx = steering_vector(tx_geom, aod_az, aod_zen)
        h += g * np.outer(p_rx, p_tx.conj())

    return OmpResult(quadruples=quadruples, atom_indices=selected,
                     gains=np.asarray(coeffs), estimated_channel=ChannelTap(tap=ms.tap, matrix=h),
                     residual_norm=trace[-1], residual_trace=trace)


__all__ = ["OmpResult", "omp"]
