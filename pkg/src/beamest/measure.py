"""Beam codebooks, beamformed measurements, and the stacked sensing operator.

One analog measurement with UE combiner matrix A (num RF chains x num UE
elements) and gNB precoder matrix B (num gNB elements x num RF chains)
observes vec(A H B). Stacking M such beam pairs gives

    y = Phi vec(H),   Phi = [B_1.T kron A_1; ...; B_M.T kron A_M].

Phi is kept in factored block form; the dense Kronecker product is only
materialized on request for oracle tests. Default beams are rank-1
(single RF chain per side): A = w^H for a UE beam w, B = f for a gNB beam f.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, ChannelTap
from .vecops import crandn, unvec, vec


@dataclass
class Codebook:
    """Set of unit-norm beams, one per column of ``beams``.

    For DFT codebooks the spatial layout is recorded so sweeps can address
    beams by (polarization, row index, col index): beam index =
    pol * rows_eff * cols_eff + a * cols_eff + b.
    """

    beams: np.ndarray  # (num elements, num beams)
    oversampling: int
    side: str  # "UE" or "gNB"
    rows_eff: int = 1  # rows * oversampling
    cols_eff: int = 1

    @property
    def num_beams(self) -> int:
        return self.beams.shape[1]

    @property
    def num_spatial(self) -> int:
        return self.rows_eff * self.cols_eff

    def beam(self, index: int) -> np.ndarray:
        return self.beams[:, index]

    def beam_layout(self, index: int) -> tuple[int, int, int]:
        """(polarization, row index, col index) of a DFT beam."""
        pol, spatial = divmod(index, self.num_spatial)
        a, b = divmod(spatial, self.cols_eff)
        return pol, a, b

    def beam_index(self, pol: int, a: int, b: int) -> int:
        return pol * self.num_spatial + (a % self.rows_eff) * self.cols_eff \
            + (b % self.cols_eff)


@dataclass(frozen=True)
class BeamPair:
    ue_beam_index: int
    gnb_beam_index: int
    rsrp_db: float


@dataclass
class SensingMatrix:
    """Stacked beamformed-measurement operator in factored block form.

    Each block is an (A_i, B_i) pair; row count is the sum of the per-block
    RF-chain products, column count num_rx * num_tx.
    """

    blocks: list[tuple[np.ndarray, np.ndarray]]
    num_rx: int
    num_tx: int

    def __post_init__(self):
        for a, b in self.blocks:
            if a.shape[1] != self.num_rx or b.shape[0] != self.num_tx:
                raise ValueError("block dimensions do not match array sizes")

    @property
    def rows(self) -> int:
        return sum(a.shape[0] * b.shape[1] for a, b in self.blocks)

    @property
    def cols(self) -> int:
        return self.num_rx * self.num_tx

    @property
    def rank1(self) -> bool:
        return all(a.shape[0] == 1 and b.shape[1] == 1 for a, b in self.blocks)

    def densify(self) -> np.ndarray:
        """Dense stacked matrix; oracle/test use only."""
        return np.vstack([np.kron(b.T, a) for a, b in self.blocks])


@dataclass
class MeasurementSet:
    """Stacked noisy observations of one channel tap through a SensingMatrix."""

    y: np.ndarray
    phi: SensingMatrix
    noise_var: float
    tap: int

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.complex128).reshape(-1)
        if self.y.size != self.phi.rows:
            raise ValueError("measurement length does not match sensing rows")


def dft_codebook(geom: ArrayGeometry, oversampling: int = 1, side: str = "UE") -> Codebook:
    """2-D DFT beam grid over the planar array, repeated per polarization.

    Beam (a, b) applies phase exp(2j*pi*(r*a/(rows*ov) + c*b/(cols*ov))) to
    the spatial element at (r, c); dual-pol codebooks activate one
    polarization per beam. Beam count = rows*cols*ov^2*polarizations.
    """
    if oversampling < 1:
        raise ValueError("oversampling must be >= 1")
    rows, cols, ov = geom.rows, geom.cols, oversampling
    r = np.arange(rows)[:, None]
    c = np.arange(cols)[:, None]
    wr = np.exp(2j * np.pi * r * np.arange(rows * ov)[None, :] / (rows * ov))
    wc = np.exp(2j * np.pi * c * np.arange(cols * ov)[None, :] / (cols * ov))
    # spatial beams: all (row-DFT, col-DFT) combinations, column index fastest
    spatial = np.einsum("ra,cb->rcab", wr, wc).reshape(rows * cols, rows * cols * ov * ov)
    spatial = spatial / np.sqrt(rows * cols)
    if geom.polarizations == 1:
        beams = spatial
    else:
        beams = np.kron(np.eye(2), spatial)  # pol-selective copies
    return Codebook(beams=beams.astype(np.complex128), oversampling=ov, side=side,
                    rows_eff=rows * ov, cols_eff=cols * ov)


def beamform_measure(h: ChannelTap, ue_beam: np.ndarray, gnb_beam: np.ndarray,
                     noise_var: float = 0.0,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """vec(A H B) plus circularly-symmetric Gaussian noise per entry.

    Beams may be vectors (single RF chain) or matrices with one column per
    RF chain; the UE side is applied as A = W^H.
    """
    w = np.atleast_2d(ue_beam.T).T  # (num_rx, n_ue_rf)
    f = np.atleast_2d(gnb_beam.T).T  # (num_tx, n_nb_rf)
    if w.shape[0] != h.matrix.shape[0] or f.shape[0] != h.matrix.shape[1]:
        raise ValueError("beam dimensions incompatible with channel")
    out = vec(w.conj().T @ h.matrix @ f)
    if noise_var > 0.0:
        if rng is None:
            raise ValueError("noise_var > 0 requires an rng")
        out = out + np.sqrt(noise_var) * crandn(rng, out.size)
    return out


def rsrp_rank(taps: ChannelTap | list[ChannelTap], ue_cb: Codebook, gnb_cb: Codebook,
              m: int, noise_var: float = 0.0,
              rng: np.random.Generator | None = None,
              distinct_beams: bool = False) -> list[BeamPair]:
    """Top-m beam pairs by measured RSRP, descending, ties lexicographic.

    RSRP of a pair is 10*log10 of its average measured power across the given
    taps; each (pair, tap) measurement draws independent noise when
    noise_var > 0. ``distinct_beams`` keeps the ranking but skips pairs that
    reuse a UE or gNB beam already taken: a diverse sweep like this is what
    makes per-side angle recovery well-posed (plain top-m around a single
    dominant path tends to reuse one UE beam, leaving AoA unobservable).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if distinct_beams:
        if m > min(ue_cb.num_beams, gnb_cb.num_beams):
            raise ValueError(f"m={m} exceeds per-side beam count for a distinct sweep")
    elif m > ue_cb.num_beams * gnb_cb.num_beams:
        raise ValueError(f"m={m} exceeds pair count")

    rsrp = _rsrp_matrix(taps, ue_cb, gnb_cb, noise_var, rng)
    flat = rsrp.reshape(-1)  # index = ue * num_gnb + gnb: lexicographic tie-break
    order = np.argsort(-flat, kind="stable")
    out: list[BeamPair] = []
    used_ue: set[int] = set()
    used_gnb: set[int] = set()
    for i in order:
        ue_i, gnb_i = int(i // gnb_cb.num_beams), int(i % gnb_cb.num_beams)
        if distinct_beams and (ue_i in used_ue or gnb_i in used_gnb):
            continue
        out.append(BeamPair(ue_i, gnb_i, float(flat[i])))
        used_ue.add(ue_i)
        used_gnb.add(gnb_i)
        if len(out) == m:
            break
    return out


def _rsrp_matrix(taps: ChannelTap | list[ChannelTap], ue_cb: Codebook,
                 gnb_cb: Codebook, noise_var: float,
                 rng: np.random.Generator | None) -> np.ndarray:
    """Measured RSRP in dB for every beam pair (UE beams x gNB beams)."""
    tap_list = taps if isinstance(taps, list) else [taps]
    if not tap_list:
        raise ValueError("need at least one channel tap")
    power = np.zeros((ue_cb.num_beams, gnb_cb.num_beams))
    for t in tap_list:
        z = ue_cb.beams.conj().T @ t.matrix @ gnb_cb.beams
        if noise_var > 0.0:
            if rng is None:
                raise ValueError("noise_var > 0 requires an rng")
            z = z + np.sqrt(noise_var) * crandn(rng, *z.shape)
        power += np.abs(z) ** 2
    power /= len(tap_list)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(power)


def refinement_pairs(taps: ChannelTap | list[ChannelTap], ue_cb: Codebook,
                     gnb_cb: Codebook, m: int = 5, noise_var: float = 0.0,
                     rng: np.random.Generator | None = None) -> list[BeamPair]:
    """Beam-refinement sweep: the top-RSRP pair plus axis-neighbor probes.

    Measurement i > 0 keeps one side's best beam and steps the other side's
    DFT index by one along alternating axes (rows, then columns, then wider
    rings). Unlike a plain top-m sweep, this covers both DFT axes on both
    sides, which is what makes the angle quadruple identifiable from a
    handful of rank-1 measurements. Duplicate pairs (degenerate layouts,
    e.g. single-row arrays) are backfilled by RSRP rank.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > ue_cb.num_beams * gnb_cb.num_beams:
        raise ValueError(f"m={m} exceeds pair count")
    rsrp = _rsrp_matrix(taps, ue_cb, gnb_cb, noise_var, rng)
    u0, g0 = np.unravel_index(int(np.argmax(rsrp)), rsrp.shape)
    up, ua, ub = ue_cb.beam_layout(int(u0))
    gp, ga, gb = gnb_cb.beam_layout(int(g0))

    candidates = [(int(u0), int(g0))]
    for ring in range(1, max(ue_cb.rows_eff, ue_cb.cols_eff,
                             gnb_cb.rows_eff, gnb_cb.cols_eff)):
        candidates.extend([
            (int(u0), gnb_cb.beam_index(gp, ga + ring, gb)),
            (int(u0), gnb_cb.beam_index(gp, ga, gb + ring)),
            (ue_cb.beam_index(up, ua + ring, ub), int(g0)),
            (ue_cb.beam_index(up, ua, ub + ring), int(g0)),
        ])
        if len(candidates) >= m + 4:
            break

    chosen: list[tuple[int, int]] = []
    for pair in candidates:
        if pair not in chosen:
            chosen.append(pair)
        if len(chosen) == m:
            break
    if len(chosen) < m:  # degenerate layouts: fill by rank from the same sweep
        order = np.argsort(-rsrp.reshape(-1), kind="stable")
        for i in order:
            pair = (int(i // gnb_cb.num_beams), int(i % gnb_cb.num_beams))
            if pair not in chosen:
                chosen.append(pair)
            if len(chosen) == m:
                break
    return [BeamPair(u, g, float(rsrp[u, g])) for u, g in chosen]


def build_sensing_matrix(pairs: list[BeamPair], ue_cb: Codebook,
                         gnb_cb: Codebook) -> SensingMatrix:
    """Factored sensing operator for the selected rank-1 beam pairs."""
    if not pairs:
        raise ValueError("need at least one beam pair")
    blocks = []
    for p in pairs:
        w = ue_cb.beam(p.ue_beam_index)
        f = gnb_cb.beam(p.gnb_beam_index)
        blocks.append((w.conj()[None, :], f[:, None]))
    return SensingMatrix(blocks=blocks, num_rx=ue_cb.beams.shape[0],
                         num_tx=gnb_cb.beams.shape[0])


def apply_phi(phi: SensingMatrix, v: np.ndarray) -> np.ndarray:
    """Phi @ v without densifying, via vec(A X B) per block."""
    v = np.asarray(v).reshape(-1)
    if v.size != phi.cols:
        raise ValueError(f"expected length {phi.cols}, got {v.size}")
    x = unvec(v, (phi.num_rx, phi.num_tx))
    return np.concatenate([vec(a @ x @ b) for a, b in phi.blocks])


def apply_phi_adj(phi: SensingMatrix, u: np.ndarray) -> np.ndarray:
    """Phi^H @ u without densifying (adjoint of :func:`apply_phi`)."""
    u = np.asarray(u).reshape(-1)
    if u.size != phi.rows:
        raise ValueError(f"expected length {phi.rows}, got {u.size}")
    out = np.zeros((phi.num_rx, phi.num_tx), dtype=np.complex128)
    pos = 0
    for a, b in phi.blocks:
        k = a.shape[0] * b.shape[1]
        block_u = unvec(u[pos:pos + k], (a.shape[0], b.shape[1]))
        out += a.conj().T @ block_u @ b.conj().T
        pos += k
    return vec(out)


def measure_channel(h: ChannelTap, pairs: list[BeamPair], ue_cb: Codebook,
                    gnb_cb: Codebook, noise_var: float = 0.0,
                    rng: np.random.Generator | None = None) -> MeasurementSet:
    """Stacked measurement of one tap through the selected beam pairs."""
    phi = build_sensing_matrix(pairs, ue_cb, gnb_cb)
    y = apply_phi(phi, vec(h.matrix))
    if noise_var > 0.0:
        if rng is None:
            raise ValueError("noise_var > 0 requires an rng")
        y = y + np.sqrt(noise_var) * crandn(rng, y.size)
    return MeasurementSet(y=y, phi=phi, noise_var=noise_var, tap=h.tap)


__all__ = [
    "Codebook", "BeamPair", "SensingMatrix", "MeasurementSet", "dft_codebook",
    "beamform_measure", "rsrp_rank", "refinement_pairs",
    "build_sensing_matrix", "apply_phi", "apply_phi_adj", "measure_channel",
]
