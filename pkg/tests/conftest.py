"""Shared desk-scale fixtures: geometries small enough to densify oracles."""

import numpy as np
import pytest

from beamest import (AngularGrid, ArrayGeometry, GridAxis, GridDictionary,
                     dft_codebook)


@pytest.fixture(scope="session")
def ue_geom():
    return ArrayGeometry(rows=2, cols=2, polarizations=2)


@pytest.fixture(scope="session")
def gnb_geom():
    return ArrayGeometry(rows=4, cols=4, polarizations=2)


@pytest.fixture(scope="session")
def desk_grid():
    """10-degree grid: 36 azimuth x 6 zenith per side, 46656 atoms total."""
    return AngularGrid()


@pytest.fixture(scope="session")
def tiny_grid():
    """2x2x2x2 grid (16 atoms): small enough to densify the dictionary."""
    az = GridAxis(2, 0.0, 360.0, endpoint=False)
    zen = GridAxis(2, 40.0, 70.0, endpoint=True)
    return AngularGrid(ue_az=az, ue_zen=zen, nb_az=az, nb_zen=zen)


@pytest.fixture(scope="session")
def tiny_dict(tiny_grid, ue_geom, gnb_geom):
    return GridDictionary(tiny_grid, ue_geom, gnb_geom)


@pytest.fixture(scope="session")
def desk_dict(desk_grid, ue_geom, gnb_geom):
    return GridDictionary(desk_grid, ue_geom, gnb_geom)


@pytest.fixture(scope="session")
def ue_cb(ue_geom):
    return dft_codebook(ue_geom, 1, side="UE")


@pytest.fixture(scope="session")
def gnb_cb(gnb_geom):
    return dft_codebook(gnb_geom, 1, side="gNB")


def rand_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)
