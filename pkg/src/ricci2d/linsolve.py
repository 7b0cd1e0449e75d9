"""Linear algebra behind the implicit steps.

The discrete Laplacian is assembled once per grid: tridiagonal rows for
radial grids (solved directly with a banded solver), a sparse CSR matrix for
Cartesian grids (solved with a sparse LU).  Rows of Dirichlet-model boundary
nodes are zero, so I - dt D L keeps those nodes fixed; Neumann rows carry the
mirrored stencil and evolve.
"""

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .grid import CARTESIAN, DIRICHLET_INITIAL, NEUMANN0, RADIAL, GridSpec
from .errors import ParameterOutOfRange


@lru_cache(maxsize=32)
def radial_lap_rows(grid: GridSpec):
    """(lo, di, up) diagonals of the radial Laplacian, origin row included."""
    if grid.kind != RADIAL or grid.stretched:
        raise ParameterOutOfRange("tridiagonal Laplacian needs a uniform radial grid")
    n, h = grid.n, grid.h
    rho = grid.axis()
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    di[0] = -4.0 / h**2
    up[0] = 4.0 / h**2
    i = np.arange(1, n - 1)
    lo[i] = 1.0 / h**2 - 1.0 / (2 * h * rho[i])
    di[i] = -2.0 / h**2
    up[i] = 1.0 / h**2 + 1.0 / (2 * h * rho[i])
    if grid.boundary == NEUMANN0:
        lo[n - 1] = 2.0 / h**2
        di[n - 1] = -2.0 / h**2
    return lo, di, up


def radial_lap_apply(values: np.ndarray, rows) -> np.ndarray:
    lo, di, up = rows
    out = np.zeros_like(values)
    out[0] = di[0] * values[0] + up[0] * values[1]
    out[1:-1] = (
        lo[1:-1] * values[:-2] + di[1:-1] * values[1:-1] + up[1:-1] * values[2:]
    )
    out[-1] = lo[-1] * values[-2] + di[-1] * values[-1]
    return out


def radial_backward_euler_solve(rhs, coef, dt, rows):
    """Solve (I - dt diag(coef) L) x = rhs for tridiagonal L."""
    lo, di, up = rows
    n = rhs.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * coef[:-1] * up[:-1]
    ab[1, :] = 1.0 - dt * coef * di
    ab[2, :-1] = -dt * coef[1:] * lo[1:]
    return solve_banded((1, 1), ab, rhs)


def radial_jacobian_solve(rhs, v, dt, rows):
    """Solve (I - dt L diag(1/v)) x = rhs (Newton step for v - dt L log v)."""
    lo, di, up = rows
    n = rhs.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * up[:-1] / v[1:]
    ab[1, :] = 1.0 - dt * di / v
    ab[2, :-1] = -dt * lo[1:] / v[:-1]
    return solve_banded((1, 1), ab, rhs)


@lru_cache(maxsize=16)
def cartesian_lap_csr(grid: GridSpec) -> sp.csr_matrix:
    """Sparse flat-metric Laplacian; boundary rows zero (Dirichlet) or
    mirrored (Neumann)."""
    if grid.kind != CARTESIAN:
        raise ParameterOutOfRange("sparse Laplacian is for Cartesian grids")
    n = grid.n
    h2 = grid.h**2
    N = n * n

    def idx(i, j):
        return i * n + j

    rows, cols, vals = [], [], []
    for i in range(n):
        for j in range(n):
            interior = 0 < i < n - 1 and 0 < j < n - 1
            if not interior and grid.boundary == DIRICHLET_INITIAL:
                continue
            k = idx(i, j)
            for di_, dj_ in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di_, j + dj_
                # Neumann: mirror ghost nodes back inside
                if ii < 0:
                    ii = 1
                elif ii > n - 1:
                    ii = n - 2
                if jj < 0:
                    jj = 1
                elif jj > n - 1:
                    jj = n - 2
                rows.append(k)
                cols.append(idx(ii, jj))
                vals.append((-4.0 if (di_, dj_) == (0, 0) else 1.0) / h2)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


def cartesian_lap_apply(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return cartesian_lap_csr(grid) @ values


def cartesian_backward_euler_solve(rhs, coef, dt, grid):
    L = cartesian_lap_csr(grid)
    N = rhs.shape[0]
    A = sp.eye(N, format="csr") - dt * sp.diags(coef) @ L
    return spsolve(A.tocsc(), rhs)


def cartesian_jacobian_solve(rhs, v, dt, grid):
    L = cartesian_lap_csr(grid)
    N = rhs.shape[0]
    A = sp.eye(N, format="csr") - dt * (L @ sp.diags(1.0 / v))
    return spsolve(A.tocsc(), rhs)


def lap_apply_for_solver(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Laplacian as the implicit solvers see it (zero rows at frozen nodes)."""
    if grid.kind == RADIAL:
        return radial_lap_apply(values, radial_lap_rows(grid))
    return cartesian_lap_apply(values, grid)
