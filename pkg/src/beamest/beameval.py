"""Beam selection from channel estimates and spectral-efficiency evaluation.

Spectral efficiency is Shannon log-det capacity of the beamformed effective
channel with equal power split across the transmit streams:

    SE = log2 det(I + snr/k * H_eff H_eff^H),   H_eff = W^H H F,

with k the number of transmit beams. Rank-1 selections reduce to
log2(1 + snr * |w^H H f|^2). The rank-2 digital bound applies the same
formula to the top-2 singular streams of the raw channel (water-filling
optional); with equal split it is a statistical reference, not a per-sample
bound for strongly rank-deficient channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, ChannelTap, steering_vector
from .measure import Codebook


@dataclass
class BeamSelection:
    """Chosen TX/RX beams (columns) and the method that produced them."""

    tx_beam: np.ndarray
    rx_beam: np.ndarray
    method: str
    ue_index: int = -1
    gnb_index: int = -1

    def __post_init__(self):
        self.tx_beam = np.atleast_2d(np.asarray(self.tx_beam, dtype=np.complex128).T).T
        self.rx_beam = np.atleast_2d(np.asarray(self.rx_beam, dtype=np.complex128).T).T
        for b in (self.tx_beam, self.rx_beam):
            norms = np.linalg.norm(b, axis=0)
            if not np.allclose(norms, 1.0, atol=1e-9):
                raise ValueError(f"beams must be unit-norm, got norms {norms}")


@dataclass
class CdfSeries:
    """Empirical CDF: sorted values with quantiles (i+1)/n."""

    values: np.ndarray
    quantiles: np.ndarray

    def quantile(self, q: float) -> float:
        """Smallest value whose empirical CDF reaches q."""
        if not 0.0 < q <= 1.0:
            raise ValueError("q must be in (0, 1]")
        i = int(np.searchsorted(self.quantiles, q - 1e-12))
        return float(self.values[min(i, len(self.values) - 1)])

    @property
    def median(self) -> float:
        return self.quantile(0.5)


def custom_beam(quadruple: tuple[float, float, float, float], tx_geom: ArrayGeometry,
                rx_geom: ArrayGeometry) -> BeamSelection:
    """Matched beams pointed along an estimated (AoA, ZoA, AoD, ZoD) quadruple.

    The TX beam is the steering vector at the departure angles (matched to
    the conjugated TX response inside the channel), the RX beam the steering
    vector at the arrival angles: on a single-path channel with this exact
    quadruple, |w^H H f| equals the path gain magnitude.
    """
    aoa_az, aoa_zen, aod_az, aod_zen = quadruple
    return BeamSelection(tx_beam=steering_vector(tx_geom, aod_az, aod_zen),
                         rx_beam=steering_vector(rx_geom, aoa_az, aoa_zen),
                         method="custom_angles")


def exhaustive_beam_search(h_hat: ChannelTap, ue_cb: Codebook, gnb_cb: Codebook,
                           method: str = "exhaustive_from_estimate") -> BeamSelection:
    """Best codebook pair by beamformed Frobenius gain on the estimate.

    Ties break lexicographically on (UE index, gNB index).
    """
    if ue_cb.num_beams == 0 or gnb_cb.num_beams == 0:
        raise ValueError("empty codebook")
    gain = np.abs(ue_cb.beams.conj().T @ h_hat.matrix @ gnb_cb.beams)
    flat = int(np.argmax(gain))  # argmax returns the first (lexicographic) maximizer
    ue_i, nb_i = divmod(flat, gnb_cb.num_beams)
    return BeamSelection(tx_beam=gnb_cb.beam(nb_i), rx_beam=ue_cb.beam(ue_i),
                         method=method, ue_index=ue_i, gnb_index=nb_i)


def spectral_efficiency(h_true: ChannelTap, sel: BeamSelection, snr: float) -> float:
    """Capacity (bits/s/Hz) of the selected beams on the true channel.

    ``snr`` is the total transmit power over noise variance (linear); power
    splits equally across TX beams.
    """
    if snr < 0:
        raise ValueError("snr must be non-negative")
    h_eff = sel.rx_beam.conj().T @ h_true.matrix @ sel.tx_beam
    k = h_eff.shape[1]
    gram = h_eff @ h_eff.conj().T
    m = np.eye(gram.shape[0]) + (snr / k) * gram
    sign, logdet = np.linalg.slogdet(m)
    if sign.real <= 0:
        return 0.0
    return float(max(logdet / np.log(2.0), 0.0))


def rank2_digital_bound(h_true: ChannelTap, snr: float,
                        water_filling: bool = False) -> float:
    """Capacity of the top-2 singular streams of the raw channel.

    Equal split by default; ``water_filling`` allocates power optimally over
    the two streams (then it upper-bounds every analog selection).
    """
    s = np.linalg.svd(h_true.matrix, compute_uv=False)
    s2 = (s[:2] ** 2) if s.size >= 2 else np.array([s[0] ** 2, 0.0])
    if not water_filling:
        return float(np.sum(np.log2(1.0 + snr * s2 / 2.0)))
    if s2[1] <= 0.0 or snr == 0.0:
        return float(np.log2(1.0 + snr * s2[0]))
    # two-stream water-filling: level nu s.t. sum max(nu - 1/g_i, 0) = snr
    inv = 1.0 / s2
    nu = (snr + inv[0] + inv[1]) / 2.0
    if nu <= inv[1]:  # weaker stream unused
        return float(np.log2(1.0 + snr * s2[0]))
    p = np.maximum(nu - inv, 0.0)
    return float(np.sum(np.log2(1.0 + p * s2)))


def build_cdf(values) -> CdfSeries:
    """Empirical CDF of a non-empty value list."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("empty input")
    n = arr.size
    return CdfSeries(values=arr, quantiles=(np.arange(n) + 1.0) / n)


__all__ = [
    "BeamSelection", "CdfSeries", "custom_beam", "exhaustive_beam_search",
    "spectral_efficiency", "rank2_digital_bound", "build_cdf",
]
