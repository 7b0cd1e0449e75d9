"""Discrete differential operators on uniform grids.

All operators are pure (inputs are never mutated) and second-order accurate,
including the boundary rows: Dirichlet-model boundaries use shifted one-sided
stencils, Neumann boundaries mirror ghost nodes.  The radial Laplacian is
w'' + w'/rho with the even-symmetry origin limit lap w(0) = 2 w''(0),
discretised as 4 (w_1 - w_0)/h^2.
"""

import numpy as np

from .errors import ParameterOutOfRange
from .grid import NEUMANN0, RADIAL, GridSpec, ScalarField


def _require_uniform(grid: GridSpec):
    if grid.stretched:
        raise ParameterOutOfRange("differential operators need a uniform grid")


def _d1_radial(w: np.ndarray, h: float) -> np.ndarray:
    """First radial derivative; w'(0) = 0 by even symmetry."""
    d = np.empty_like(w)
    d[0] = 0.0
    d[1:-1] = (w[2:] - w[:-2]) / (2 * h)
    d[-1] = (3 * (w[-1] - w[-2]) - (w[-2] - w[-3])) / (2 * h)
    return d


def _d2_radial(w: np.ndarray, h: float) -> np.ndarray:
    """Second radial derivative; even extension at the origin."""
    d = np.empty_like(w)
    d[0] = 2.0 * (w[1] - w[0]) / h**2
    d[1:-1] = (w[2:] - 2 * w[1:-1] + w[:-2]) / h**2
    d[-1] = (2 * (w[-1] - w[-2]) - 3 * (w[-2] - w[-3]) + (w[-3] - w[-4])) / h**2
    return d


def laplacian(w: ScalarField) -> ScalarField:
    """Flat-metric Laplacian (5-point Cartesian stencil / radial w'' + w'/rho)."""
    _require_uniform(w.grid)
    g = w.grid
    h = g.h
    if g.kind == RADIAL:
        v = w.values
        rho = g.axis()
        out = np.empty_like(v)
        out[0] = 4.0 * (v[1] - v[0]) / h**2
        out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2 + (v[2:] - v[:-2]) / (
            2 * h * rho[1:-1]
        )
        if g.boundary == NEUMANN0:
            out[-1] = 2.0 * (v[-2] - v[-1]) / h**2
        else:
            out[-1] = (2 * (v[-1] - v[-2]) - 3 * (v[-2] - v[-3]) + (v[-3] - v[-4])) / h**2 + (
                3 * (v[-1] - v[-2]) - (v[-2] - v[-3])
            ) / (2 * h * rho[-1])
        return ScalarField(g, out)

    a = w.as_grid()
    out = np.empty_like(a)
    out[1:-1, 1:-1] = (
        a[1:-1, 2:] + a[1:-1, :-2] + a[2:, 1:-1] + a[:-2, 1:-1] - 4 * a[1:-1, 1:-1]
    )
    if g.boundary == NEUMANN0:
        ext = np.pad(a, 1, mode="reflect")  # mirror ghosts: zero normal derivative
        full = ext[1:-1, 2:] + ext[1:-1, :-2] + ext[2:, 1:-1] + ext[:-2, 1:-1] - 4 * a
        out[0, :] = full[0, :]
        out[-1, :] = full[-1, :]
        out[:, 0] = full[:, 0]
        out[:, -1] = full[:, -1]
    else:
        dxx = _one_sided_d2(a, axis=1)
        dyy = _one_sided_d2(a, axis=0)
        out[0, :] = dxx[0, :] + dyy[0, :]
        out[-1, :] = dxx[-1, :] + dyy[-1, :]
        out[:, 0] = dxx[:, 0] + dyy[:, 0]
        out[:, -1] = dxx[:, -1] + dyy[:, -1]
    return ScalarField(g, (out / h**2).ravel())


def _one_sided_d2(a: np.ndarray, axis: int) -> np.ndarray:
    """Second difference along an axis, one-sided second order in the first
    and last rows, central elsewhere.  Returns h^2 * d2."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = a[2:] - 2 * a[1:-1] + a[:-2]
    out[0] = 2 * (a[0] - a[1]) - 3 * (a[1] - a[2]) + (a[2] - a[3])
    out[-1] = 2 * (a[-1] - a[-2]) - 3 * (a[-2] - a[-3]) + (a[-3] - a[-4])
    return np.moveaxis(out, 0, axis)


def _one_sided_d1(a: np.ndarray, axis: int) -> np.ndarray:
    """First difference along an axis (times 2h), one-sided at the two ends."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = a[2:] - a[:-2]
    out[0] = -3 * (a[0] - a[1]) + (a[1] - a[2])
    out[-1] = 3 * (a[-1] - a[-2]) - (a[-2] - a[-3])
    return np.moveaxis(out, 0, axis)


def gradient_components(w: ScalarField):
    """Central-difference gradient, one-sided at the boundary.

    Radial grids return the single component w'(rho); Cartesian grids return
    (w_x, w_y) as (n, n) arrays.
    """
    _require_uniform(w.grid)
    g = w.grid
    h = g.h
    if g.kind == RADIAL:
        return (_d1_radial(w.values, h),)
    a = w.as_grid()
    return _one_sided_d1(a, axis=1) / (2 * h), _one_sided_d1(a, axis=0) / (2 * h)


def grad_sq_euclid(w: ScalarField) -> ScalarField:
    """|grad w|^2 in the flat metric."""
    comps = gradient_components(w)
    if w.grid.kind == RADIAL:
        return ScalarField(w.grid, comps[0] ** 2)
    wx, wy = comps
    return ScalarField(w.grid, (wx**2 + wy**2).ravel())


def sup_norm(w: ScalarField) -> float:
    return float(np.abs(w.values).max())


def hessian_sq_euclid(w: ScalarField) -> ScalarField:
    """Squared Frobenius norm of the flat-metric Hessian.

    For a radial profile the flat Hessian has eigenvalues w'' and w'/rho
    (limit w''(0) at the origin), so the norm is w''^2 + (w'/rho)^2.
    """
    _require_uniform(w.grid)
    g = w.grid
    h = g.h
    if g.kind == RADIAL:
        d1 = _d1_radial(w.values, h)
        d2 = _d2_radial(w.values, h)
        rho = g.axis()
        ang = np.empty_like(d1)
        ang[0] = d2[0]  # w'/rho -> w''(0)
        ang[1:] = d1[1:] / rho[1:]
        return ScalarField(g, d2**2 + ang**2)
    a = w.as_grid()
    wxx = _one_sided_d2(a, axis=1) / h**2
    wyy = _one_sided_d2(a, axis=0) / h**2
    wxy = _one_sided_d1(_one_sided_d1(a, axis=1), axis=0) / (4 * h**2)
    return ScalarField(g, (wxx**2 + wyy**2 + 2 * wxy**2).ravel())
