"""Column-major vectorization helpers and complex Gaussian sampling.

All vectorized quantities in this package use the column-major (Fortran)
convention, so that vec(A X B) = (B.T kron A) vec(X) holds with numpy's
``kron``. Mixing conventions silently breaks every Kronecker identity, hence
the single choke point here.
"""

from __future__ import annotations

import numpy as np


def vec(x: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into a vector (column-major)."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`vec` for the given matrix shape."""
    return np.asarray(v).reshape(shape, order="F")


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly-symmetric complex Gaussian, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
