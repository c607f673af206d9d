"""Geometric multipath channel synthesis for planar (dual-pol) arrays.

A channel delay tap is a sum of rank-1 path contributions

    H_d = sum_l gain_l * p_rx(aoa_az, aoa_zen) * p_tx(aod_az, aod_zen)^H

with unit-norm steering vectors on both sides. Conventions used everywhere
in this package:

* array elements lie in the local x-y plane (rows along x, cols along y),
  boresight is +z;
* zenith is measured from +z, azimuth from +x, both in degrees;
* dual polarization doubles the vector length: the two co-located elements
  carry direction-independent slant weights cos(slant) and cos(slant+90deg).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar antenna panel: rows x cols elements, 1 or 2 polarizations."""

    rows: int
    cols: int
    element_spacing: float = 0.5  # in wavelengths
    polarizations: int = 2
    slant_deg: float = 45.0
    orientation_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be positive")
        if self.polarizations not in (1, 2):
            raise ValueError("polarizations must be 1 or 2")

    @property
    def num_spatial(self) -> int:
        return self.rows * self.cols

    @property
    def num_elements(self) -> int:
        return self.rows * self.cols * self.polarizations


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain, angle quadruple, delay tap."""

    gain: complex
    aoa_az: float
    aoa_zen: float
    aod_az: float
    aod_zen: float
    tap: int

    def __post_init__(self):
        for az in (self.aoa_az, self.aod_az):
            if not 0.0 <= az < 360.0:
                raise ValueError(f"azimuth {az} outside [0, 360)")
        for zen in (self.aoa_zen, self.aod_zen):
            if not 0.0 <= zen <= 180.0:
                raise ValueError(f"zenith {zen} outside [0, 180]")
        if self.tap < 0:
            raise ValueError("tap index must be non-negative")


@dataclass
class ChannelTap:
    """Dense channel matrix (num RX elements x num TX elements) of one delay tap."""

    tap: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("channel matrix has non-finite entries")

    @property
    def frob_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


@dataclass(frozen=True)
class PathGenConfig:
    """Knobs of the simplified cluster-based path generator.

    Angles are drawn Gaussian around cluster centers; gains are complex
    Gaussian with an exponentially decaying power-delay profile. With
    ``cluster_pool_size > 0``, cluster centers are drawn once from a
    seeded pool shared by all channels of the scenario, mimicking fixed
    scatterers of one deployment.
    """

    tap_count_range: tuple[int, int] = (2, 4)
    paths_per_tap_range: tuple[int, int] = (1, 3)
    clusters_per_tap_range: tuple[int, int] = (1, 1)
    cluster_pool_size: int = 0
    angular_spread_deg: float = 2.0
    pdp_decay: float = 1.0
    on_grid: bool = False
    aoa_az_range: tuple[float, float] = (0.0, 360.0)
    aoa_zen_range: tuple[float, float] = (30.0, 80.0)
    aod_az_range: tuple[float, float] = (0.0, 360.0)
    aod_zen_range: tuple[float, float] = (30.0, 80.0)

    def __post_init__(self):
        for lo, hi in (self.tap_count_range, self.paths_per_tap_range,
                       self.clusters_per_tap_range):
            if lo < 1 or hi < lo:
                raise ValueError("count ranges must satisfy 1 <= lo <= hi")
        if self.pdp_decay <= 0:
            raise ValueError("pdp_decay must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full simulation scenario: link budget, geometries, path generator."""

    ue_geom: ArrayGeometry = ArrayGeometry(2, 2)
    gnb_geom: ArrayGeometry = ArrayGeometry(4, 4)
    carrier_freq_hz: float = 28e9
    subcarrier_spacing_hz: float = 120e3
    num_tones: int = 4096
    gnb_tx_power_dbm: float = 23.0
    gnb_antenna_gain_dbi: float = 5.0
    ue_noise_figure_db: float = 13.0
    rng_seed: int = 1
    paths: PathGenConfig = field(default_factory=PathGenConfig)

    def __post_init__(self):
        for v in (self.carrier_freq_hz, self.subcarrier_spacing_hz,
                  self.gnb_tx_power_dbm, self.gnb_antenna_gain_dbi,
                  self.ue_noise_figure_db):
            if not np.isfinite(v):
                raise ValueError("scenario powers/figures must be finite")
        n = self.num_tones
        if n < 1 or (n & (n - 1)) != 0:
            raise ValueError("num_tones must be a power of two")


def _rotation_matrix(orientation_deg: tuple[float, float, float]) -> np.ndarray:
    """Local-to-global rotation, intrinsic Z(alpha)-Y(beta)-X(gamma)."""
    a, b, g = np.deg2rad(orientation_deg)
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rx = np.array([[1, 0, 0], [0, cg, -sg], [0, sg, cg]])
    return rz @ ry @ rx


def direction_unit_vector(azimuth_deg: float, zenith_deg: float) -> np.ndarray:
    az = np.deg2rad(azimuth_deg)
    zen = np.deg2rad(zenith_deg)
    return np.array([np.sin(zen) * np.cos(az), np.sin(zen) * np.sin(az), np.cos(zen)])


def steering_vector(geom: ArrayGeometry, azimuth_deg: float, zenith_deg: float) -> np.ndarray:
    """Unit-norm array response vector for a plane wave from the given direction.

    Entry order: polarization-major, then rows x cols in row-major order
    (column index fastest). Every entry has the same magnitude; the phase of
    the spatial part is 2*pi*(element position . direction)/lambda.
    """
    if not 0.0 <= azimuth_deg < 360.0:
        raise ValueError(f"azimuth {azimuth_deg} outside [0, 360)")
    if not 0.0 <= zenith_deg <= 180.0:
        raise ValueError(f"zenith {zenith_deg} outside [0, 180]")

    k_global = direction_unit_vector(azimuth_deg, zenith_deg)
    k_local = _rotation_matrix(geom.orientation_deg).T @ k_global

    r = np.arange(geom.rows)[:, None]
    c = np.arange(geom.cols)[None, :]
    phase = 2.0 * np.pi * geom.element_spacing * (r * k_local[0] + c * k_local[1])
    spatial = np.exp(1j * phase).reshape(-1)

    if geom.polarizations == 1:
        v = spatial
    else:
        s = np.deg2rad(geom.slant_deg)
        v = np.concatenate([np.cos(s) * spatial, np.cos(s + np.pi / 2) * spatial])
    return v / np.sqrt(geom.num_spatial)


def build_channel_tap(paths: list[PathParams], rx_geom: ArrayGeometry,
                      tx_geom: ArrayGeometry, tap: int | None = None) -> ChannelTap:
    """Sum of rank-1 path contributions for one delay tap.

    All paths must share the same tap index (pass ``tap`` explicitly for an
    empty list).
    """
    if paths:
        taps = {p.tap for p in paths}
        if len(taps) > 1:
            raise ValueError(f"paths span multiple taps: {sorted(taps)}")
        d = paths[0].tap
        if tap is not None and tap != d:
            raise ValueError(f"tap argument {tap} does not match path tap {d}")
    else:
        d = 0 if tap is None else tap

    h = np.zeros((rx_geom.num_elements, tx_geom.num_elements), dtype=np.complex128)
    for p in paths:
        p_rx = steering_vector(rx_geom, p.aoa_az, p.aoa_zen)
        p_tx = steering_vector(tx_geom, p.aod_az, p.aod_zen)
        h += p.gain * np.outer(p_rx, p_tx.conj())
    return ChannelTap(tap=d, matrix=h)


def channel_taps(paths: list[PathParams], rx_geom: ArrayGeometry,
                 tx_geom: ArrayGeometry) -> list[ChannelTap]:
    """One ChannelTap per distinct tap index present in the path list."""
    out = []
    for d in sorted({p.tap for p in paths}):
        out.append(build_channel_tap([p for p in paths if p.tap == d],
                                     rx_geom, tx_geom))
    return out


def dominant_taps(taps: list[ChannelTap], k: int) -> list[int]:
    """Positions of the k largest-Frobenius-norm taps, descending, ties by lower position."""
    if k < 1:
        raise ValueError("k must be >= 1")
    norms = np.array([t.frob_norm for t in taps])
    order = np.argsort(-norms, kind="stable")
    return [int(i) for i in order[: min(k, len(taps))]]


def _snap(value: float, points: np.ndarray) -> float:
    return float(points[np.argmin(np.abs(points - value))])


def _wrap_az(az: float) -> float:
    return float(np.mod(az, 360.0))


class ClusterPool:
    """Seeded pool of angle-quadruple cluster centers shared across channels."""

    def __init__(self, cfg: PathGenConfig, seed: int):
        rng = np.random.default_rng(seed)
        self.centers = [self._draw_center(cfg, rng) for _ in range(max(cfg.cluster_pool_size, 1))]

    @staticmethod
    def _draw_center(cfg: PathGenConfig, rng: np.random.Generator):
        return (
            rng.uniform(*cfg.aoa_az_range) % 360.0,
            rng.uniform(*cfg.aoa_zen_range),
            rng.uniform(*cfg.aod_az_range) % 360.0,
            rng.uniform(*cfg.aod_zen_range),
        )


def synth_paths(config: ScenarioConfig, rng: np.random.Generator,
                grid=None, pool: ClusterPool | None = None) -> list[PathParams]:
    """Draw one channel realization as a list of PathParams.

    Deterministic given the rng state. ``grid`` (an AngularGrid) enables
    on-grid mode: every angle snaps to the nearest grid point, so single-path
    channels are exactly 1-sparse in the grid dictionary. When the config
    requests a cluster pool and none is passed, one is derived from the
    scenario seed.
    """
    cfg = config.paths
    if cfg.on_grid and grid is None:
        raise ValueError("on-grid path generation needs an angular grid")
    if cfg.cluster_pool_size > 0 and pool is None:
        pool = ClusterPool(cfg, config.rng_seed)

    def draw_center():
        if pool is not None:
            return pool.centers[rng.integers(len(pool.centers))]
        return ClusterPool._draw_center(cfg, rng)

    num_taps = int(rng.integers(cfg.tap_count_range[0], cfg.tap_count_range[1] + 1))
    paths: list[PathParams] = []
    for d in range(num_taps):
        n_clusters = int(rng.integers(cfg.clusters_per_tap_range[0],
                                      cfg.clusters_per_tap_range[1] + 1))
        centers = [draw_center() for _ in range(n_clusters)]
        n_paths = int(rng.integers(cfg.paths_per_tap_range[0],
                                   cfg.paths_per_tap_range[1] + 1))
        # gain std so that path power decays as exp(-tap/pdp_decay)
        amp = np.exp(-d / (2.0 * cfg.pdp_decay)) / np.sqrt(n_paths)
        for _ in range(n_paths):
            c = centers[rng.integers(n_clusters)]
            angles = np.array(c) + rng.normal(0.0, cfg.angular_spread_deg, size=4)
            aoa_az = _wrap_az(angles[0])
            aoa_zen = float(np.clip(angles[1], *cfg.aoa_zen_range))
            aod_az = _wrap_az(angles[2])
            aod_zen = float(np.clip(angles[3], *cfg.aod_zen_range))
            if cfg.on_grid:
                aoa_az = _snap_az(aoa_az, grid.ue_az_points)
                aoa_zen = _snap(aoa_zen, grid.ue_zen_points)
                aod_az = _snap_az(aod_az, grid.nb_az_points)
                aod_zen = _snap(aod_zen, grid.nb_zen_points)
            g = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
            paths.append(PathParams(gain=amp * g, aoa_az=aoa_az, aoa_zen=aoa_zen,
                                    aod_az=aod_az, aod_zen=aod_zen, tap=d))
    return paths


def _snap_az(az: float, points: np.ndarray) -> float:
    """Nearest azimuth grid point under 360-degree wraparound."""
    d = np.abs(np.mod(points - az + 180.0, 360.0) - 180.0)
    return float(points[np.argmin(d)])


def link_budget_noise_dbm(config: ScenarioConfig) -> float:
    """Thermal noise power over the full occupied bandwidth, in dBm.

    -174 dBm/Hz + 10*log10(SCS * num_tones) + UE noise figure. The direct
    ``noise_var`` knobs elsewhere override this for controlled-SNR tests.
    """
    bw = config.subcarrier_spacing_hz * config.num_tones
    return -174.0 + 10.0 * np.log10(bw) + config.ue_noise_figure_db


__all__ = [
    "ArrayGeometry", "PathParams", "ChannelTap", "PathGenConfig",
    "ScenarioConfig", "ClusterPool", "steering_vector", "build_channel_tap",
    "channel_taps", "dominant_taps", "synth_paths", "direction_unit_vector",
    "link_budget_noise_dbm",
]
