"""Sparsifying dictionaries: implicit angular grid and learned orthonormal sets.

The grid dictionary is Psi = conj(P_T) kron P_R, with P_R / P_T the per-side
steering matrices sampled over a 2-D (azimuth x zenith) grid on each end.
At realistic grid sizes Psi has too many atoms to materialize, so it is kept
in factored form: Psi z = vec(P_R Z P_T^H) and Psi^H v = vec(P_R^H V P_T).

Learned dictionaries compress this: iterative hard-thresholding sparse PCA
alternates an orthogonal-Procrustes dictionary step with column-wise hard
thresholding; kSVD alternates OMP sparse coding with per-atom rank-1 updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, steering_vector
from .vecops import crandn, unvec, vec


@dataclass(frozen=True)
class GridAxis:
    """Uniform angle axis; periodic axes (azimuth) exclude the endpoint."""

    n: int
    start: float
    stop: float
    endpoint: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("axis needs at least one point")
        if self.stop <= self.start:
            raise ValueError("axis range must be increasing")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n, endpoint=self.endpoint)


def _default_az_axis(n: int = 36) -> GridAxis:
    return GridAxis(n, 0.0, 360.0, endpoint=False)


def _default_zen_axis(n: int = 6) -> GridAxis:
    # [30, 80] deg: keeps grid atoms distinct (no mirror/endfire aliasing of a
    # phase-only planar array) while covering a realistic elevation sector.
    return GridAxis(n, 30.0, 80.0, endpoint=True)


@dataclass(frozen=True)
class AngularGrid:
    """Angle quadruple grid: (UE azimuth, UE zenith, gNB azimuth, gNB zenith).

    Index conventions, fixed everywhere: within one side, azimuth varies
    fastest (side_index = zen_idx * n_az + az_idx); across sides the UE (RX)
    side varies fastest (atom_index = nb_side_index * ue_grid_size + ue_side_index),
    which is the column order of conj(P_T) kron P_R.
    """

    ue_az: GridAxis = field(default_factory=_default_az_axis)
    ue_zen: GridAxis = field(default_factory=_default_zen_axis)
    nb_az: GridAxis = field(default_factory=_default_az_axis)
    nb_zen: GridAxis = field(default_factory=_default_zen_axis)

    @property
    def ue_az_points(self) -> np.ndarray:
        return self.ue_az.points

    @property
    def ue_zen_points(self) -> np.ndarray:
        return self.ue_zen.points

    @property
    def nb_az_points(self) -> np.ndarray:
        return self.nb_az.points

    @property
    def nb_zen_points(self) -> np.ndarray:
        return self.nb_zen.points

    @property
    def ue_size(self) -> int:
        return self.ue_az.n * self.ue_zen.n

    @property
    def nb_size(self) -> int:
        return self.nb_az.n * self.nb_zen.n

    @property
    def num_atoms(self) -> int:
        return self.ue_size * self.nb_size

    def decode(self, index: int) -> tuple[float, float, float, float]:
        """Atom index -> (aoa_az, aoa_zen, aod_az, aod_zen) in degrees."""
        if not 0 <= index < self.num_atoms:
            raise IndexError(f"atom index {index} out of range")
        nb_i, ue_i = divmod(index, self.ue_size)
        ue_zen_i, ue_az_i = divmod(ue_i, self.ue_az.n)
        nb_zen_i, nb_az_i = divmod(nb_i, self.nb_az.n)
        return (float(self.ue_az_points[ue_az_i]), float(self.ue_zen_points[ue_zen_i]),
                float(self.nb_az_points[nb_az_i]), float(self.nb_zen_points[nb_zen_i]))

    def encode(self, aoa_az: float, aoa_zen: float, aod_az: float, aod_zen: float) -> int:
        """Quadruple of exact grid values -> atom index."""
        ue_az_i = _exact_index(self.ue_az_points, aoa_az)
        ue_zen_i = _exact_index(self.ue_zen_points, aoa_zen)
        nb_az_i = _exact_index(self.nb_az_points, aod_az)
        nb_zen_i = _exact_index(self.nb_zen_points, aod_zen)
        ue_i = ue_zen_i * self.ue_az.n + ue_az_i
        nb_i = nb_zen_i * self.nb_az.n + nb_az_i
        return nb_i * self.ue_size + ue_i


def _exact_index(points: np.ndarray, value: float) -> int:
    i = int(np.argmin(np.abs(points - value)))
    if abs(points[i] - value) > 1e-9:
        raise ValueError(f"angle {value} is not a grid point")
    return i


class GridDictionary:
    """Implicit angular-grid dictionary over a pair of array geometries."""

    def __init__(self, grid: AngularGrid, rx_geom: ArrayGeometry, tx_geom: ArrayGeometry):
        self.grid = grid
        self.rx_geom = rx_geom
        self.tx_geom = tx_geom
        self._p_rx: np.ndarray | None = None
        self._p_tx: np.ndarray | None = None

    @property
    def num_atoms(self) -> int:
        return self.grid.num_atoms

    @property
    def dim(self) -> int:
        return self.rx_geom.num_elements * self.tx_geom.num_elements

    def steering_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """(P_R, P_T): unit-norm steering columns over each side's grid."""
        if self._p_rx is None:
            self._p_rx = _side_matrix(self.rx_geom, self.grid.ue_az_points,
                                      self.grid.ue_zen_points)
            self._p_tx = _side_matrix(self.tx_geom, self.grid.nb_az_points,
                                      self.grid.nb_zen_points)
        return self._p_rx, self._p_tx

    def atom(self, index: int) -> np.ndarray:
        """Unit-norm atom kron(conj(p_tx), p_rx) for the decoded quadruple."""
        aoa_az, aoa_zen, aod_az, aod_zen = self.grid.decode(index)
        p_rx = steering_vector(self.rx_geom, aoa_az, aoa_zen)
        p_tx = steering_vector(self.tx_geom, aod_az, aod_zen)
        return np.kron(p_tx.conj(), p_rx)

    def apply(self, z: np.ndarray) -> np.ndarray:
        """Psi @ z via the Kronecker factors."""
        z = np.asarray(z).reshape(-1)
        if z.size != self.num_atoms:
            raise ValueError(f"expected length {self.num_atoms}, got {z.size}")
        p_rx, p_tx = self.steering_matrices()
        zm = unvec(z, (self.grid.ue_size, self.grid.nb_size))
        return vec(p_rx @ zm @ p_tx.conj().T)

    def apply_adj(self, v: np.ndarray) -> np.ndarray:
        """Psi^H @ v via the Kronecker factors."""
        v = np.asarray(v).reshape(-1)
        if v.size != self.dim:
            raise ValueError(f"expected length {self.dim}, got {v.size}")
        p_rx, p_tx = self.steering_matrices()
        vm = unvec(v, (self.rx_geom.num_elements, self.tx_geom.num_elements))
        return vec(p_rx.conj().T @ vm @ p_tx)

    def densify(self) -> np.ndarray:
        """Dense Psi; only for small grids (oracle tests)."""
        p_rx, p_tx = self.steering_matrices()
        return np.kron(p_tx.conj(), p_rx)


def _side_matrix(geom: ArrayGeometry, az_points: np.ndarray,
                 zen_points: np.ndarray) -> np.ndarray:
    cols = []
    for zen in zen_points:  # azimuth fastest within a side
        for az in az_points:
            cols.append(steering_vector(geom, float(az), float(zen)))
    return np.stack(cols, axis=1)


@dataclass
class LearnedDictionary:
    """Dense learned dictionary with unit-norm (SPCA: orthonormal) columns."""

    d: np.ndarray  # (dim, num atoms)
    method: str  # "spca" | "ksvd" | "random"
    sparsity: int = 0
    iterations: int = 0
    seed: int = 0
    recon_errors: list[float] = field(default_factory=list)

    @property
    def num_atoms(self) -> int:
        return self.d.shape[1]

    @property
    def dim(self) -> int:
        return self.d.shape[0]

    def atom(self, index: int) -> np.ndarray:
        return self.d[:, index]

    def apply(self, z: np.ndarray) -> np.ndarray:
        return self.d @ np.asarray(z).reshape(-1)

    def apply_adj(self, v: np.ndarray) -> np.ndarray:
        return self.d.conj().T @ np.asarray(v).reshape(-1)

    def densify(self) -> np.ndarray:
        return self.d


def apply_dict(dictionary, z: np.ndarray) -> np.ndarray:
    return dictionary.apply(z)


def apply_dict_adj(dictionary, v: np.ndarray) -> np.ndarray:
    return dictionary.apply_adj(v)


def hard_threshold(matrix: np.ndarray, s: int) -> np.ndarray:
    """Keep the s largest-magnitude entries per column, zero the rest.

    Ties go to the lower row index; idempotent by construction.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    x = np.atleast_2d(np.asarray(matrix))
    squeeze = np.asarray(matrix).ndim == 1
    if squeeze:
        x = x.T
    out = np.zeros_like(x)
    if s > 0:
        for j in range(x.shape[1]):
            order = np.argsort(-np.abs(x[:, j]), kind="stable")[:s]
            out[order, j] = x[order, j]
    return out[:, 0] if squeeze else out


def spca_iht(h_data: np.ndarray, iterations: int = 30, sparsity: int | None = None,
             rng: np.random.Generator | None = None,
             num_atoms: int | None = None) -> LearnedDictionary:
    """Iterative hard-thresholding sparse PCA over channel snapshots.

    Alternates D <- U V^H from the SVD of H Z^H (orthogonal Procrustes, so
    D^H D = I after every iteration) with Z <- column-wise hard threshold of
    D^H H. Defaults: 30 iterations, sparsity = top 10% of the rows per column.
    Z starts complex Gaussian. ``num_atoms`` truncates the result to the
    columns with the largest explained energy ||row of Z||^2.
    """
    h = np.asarray(h_data, dtype=np.complex128)
    if h.ndim != 2 or h.size == 0:
        raise ValueError("data matrix must be a non-empty 2-D array")
    n, m = h.shape
    r = min(n, m)
    if sparsity is None:
        sparsity = max(1, int(round(0.1 * r)))
    if rng is None:
        rng = np.random.default_rng(0)

    z = crandn(rng, r, m)
    errors = []
    d = None
    for _ in range(iterations):
        u, _, vh = np.linalg.svd(h @ z.conj().T, full_matrices=False)
        d = u @ vh
        z = hard_threshold(d.conj().T @ h, sparsity)
        errors.append(float(np.linalg.norm(h - d @ z)))

    if num_atoms is not None and num_atoms < r:
        energy = np.sum(np.abs(z) ** 2, axis=1)
        keep = np.sort(np.argsort(-energy, kind="stable")[:num_atoms])
        d = d[:, keep]
    return LearnedDictionary(d=d, method="spca", sparsity=sparsity,
                             iterations=iterations, recon_errors=errors)


def _omp_code(d: np.ndarray, x: np.ndarray, s: int) -> np.ndarray:
    """Dense-dictionary OMP sparse coding of one column (fixed sparsity)."""
    resid = x.copy()
    support: list[int] = []
    z = np.zeros(d.shape[1], dtype=np.complex128)
    for _ in range(min(s, d.shape[0], d.shape[1])):
        corr = np.abs(d.conj().T @ resid)
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        coef, *_ = np.linalg.lstsq(d[:, support], x, rcond=None)
        resid = x - d[:, support] @ coef
    z[support] = coef
    return z


def ksvd(h_data: np.ndarray, num_atoms: int, sparsity: int,
         iterations: int = 1, rng: np.random.Generator | None = None) -> LearnedDictionary:
    """kSVD dictionary learning: OMP sparse coding + per-atom rank-1 updates.

    One iteration already yields usable atoms on well-structured data, which
    is the default here. Initial atoms are data columns picked greedily so no
    two start more than 0.9-correlated (random fill if the data runs out);
    unused atoms are re-seeded from the worst-represented sample.
    """
    h = np.asarray(h_data, dtype=np.complex128)
    n, m = h.shape
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if num_atoms > 4096:
        raise ValueError("num_atoms > 4096 not supported for dense kSVD")
    if rng is None:
        rng = np.random.default_rng(0)

    d = _decorrelated_init(h, num_atoms, rng)
    z = np.zeros((num_atoms, m), dtype=np.complex128)
    for _ in range(iterations):
        for j in range(m):
            z[:, j] = _omp_code(d, h[:, j], sparsity)
        for k in range(num_atoms):
            used = np.flatnonzero(z[k] != 0)
            if used.size == 0:
                worst = int(np.argmax(np.linalg.norm(h - d @ z, axis=0)))
                d[:, k] = h[:, worst] / max(np.linalg.norm(h[:, worst]), 1e-15)
                continue
            e = h[:, used] - d @ z[:, used] + np.outer(d[:, k], z[k, used])
            u, sv, vh = np.linalg.svd(e, full_matrices=False)
            d[:, k] = u[:, 0]
            z[k, used] = sv[0] * vh[0]
    err = float(np.linalg.norm(h - d @ z))
    return LearnedDictionary(d=d, method="ksvd", sparsity=sparsity,
                             iterations=iterations, recon_errors=[err])


def _decorrelated_init(h: np.ndarray, num_atoms: int, rng: np.random.Generator) -> np.ndarray:
    n, m = h.shape
    norms = np.linalg.norm(h, axis=0)
    candidates = [j for j in np.argsort(-norms, kind="stable") if norms[j] > 1e-12]
    atoms: list[np.ndarray] = []
    for j in candidates:
        if len(atoms) == num_atoms:
            break
        cand = h[:, j] / norms[j]
        if all(abs(np.vdot(a, cand)) < 0.9 for a in atoms):
            atoms.append(cand)
    while len(atoms) < num_atoms:
        v = crandn(rng, n)
        atoms.append(v / np.linalg.norm(v))
    return np.stack(atoms, axis=1)


def random_dictionary(dim: int, num_atoms: int, rng: np.random.Generator) -> LearnedDictionary:
    """Gaussian dictionary with unit-norm columns (baseline / init)."""
    d = crandn(rng, dim, num_atoms)
    d /= np.linalg.norm(d, axis=0, keepdims=True)
    return LearnedDictionary(d=d, method="random")


__all__ = [
    "GridAxis", "AngularGrid", "GridDictionary", "LearnedDictionary",
    "apply_dict", "apply_dict_adj", "hard_threshold", "spca_iht", "ksvd",
    "random_dictionary",
]
