import numpy as np
import pytest

import ricci2d as r


@pytest.fixture(scope="session")
def radial_grid_fine():
    return r.GridSpec(r.RADIAL, 10.0, 401)


@pytest.fixture(scope="session")
def cigar_field_fine(radial_grid_fine):
    rho = radial_grid_fine.axis()
    return r.ConformalField(r.ScalarField(radial_grid_fine, -np.log(1 + rho**2)))


def make_radial(L, n, u_fn, boundary=r.DIRICHLET_INITIAL):
    g = r.GridSpec(r.RADIAL, L, n, boundary=boundary)
    return r.ConformalField(r.ScalarField(g, u_fn(g.axis())))


def make_cartesian(L, n, u_fn):
    g = r.GridSpec(r.CARTESIAN, L, n)
    return r.ConformalField(r.ScalarField(g, u_fn(g.radii())))
