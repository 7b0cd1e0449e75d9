"""Potential-function machinery.

The potential f solves lap_g f = R at t = 0 (with the convention
lap_g = e^{-u} lap for g = e^u g_E, this pins f_0 = -u_0 up to a harmonic,
here constant, offset) and is advected by the heat equation of the evolving
metric, f_t = lap_g f, in lockstep with the flow.  The monitored quantity
F = t |grad f|_g^2 + f^2 is a supersolution of that heat equation, so its
sup must not increase; ``max_principle_check`` audits the recorded history.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import linsolve
from .errors import ParameterOutOfRange, PoissonNotConverged
from .grid import RADIAL, ConformalField, GridSpec, ScalarField
from .operators import grad_sq_euclid, laplacian
from .geometry import scalar_curvature

NEG_U0 = "NegU0"
POISSON_SOLVE = "PoissonSolve"
POISSON_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class PotentialGauge:
    kind: str = NEG_U0
    harmonic_offset: float = 0.0

    def __post_init__(self):
        if self.kind not in (NEG_U0, POISSON_SOLVE):
            raise ParameterOutOfRange(f"unknown potential gauge {self.kind!r}")


def f0_boundedness_warning(f0: ScalarField) -> bool:
    """Warn when f0 is still growing at the domain edge (the truncated grid
    cannot represent a bounded tail for it).  Returns True when flagged."""
    g = f0.grid
    vals = np.abs(f0.values if g.kind == RADIAL else f0.as_grid()[g.n // 2, :])
    tail = vals[-max(4, len(vals) // 10):]
    growing = tail[-1] >= vals.max() * 0.999 and (tail[-1] - tail[0]) > 0.05
    if growing:
        warnings.warn(
            "f0-unbounded: initial potential keeps growing at the domain edge",
            RuntimeWarning,
            stacklevel=3,
        )
    return growing


def solve_initial_potential(m0: ConformalField, gauge: PotentialGauge) -> ScalarField:
    """Initial potential with lap f0 = -lap u0 in the chosen gauge."""
    u0 = m0.u
    if gauge.kind == NEG_U0:
        f0 = ScalarField(u0.grid, -u0.values + gauge.harmonic_offset)
        f0_boundedness_warning(f0)
        return f0

    # PoissonSolve: lap f = -lap u0, Dirichlet data -u0 + c on the boundary.
    g = u0.grid
    rhs_field = laplacian(u0)
    if g.kind == RADIAL:
        rows = linsolve.radial_lap_rows(g)
        lo, di, up = (r.copy() for r in rows)
        n = g.n
        rhs = -linsolve.radial_lap_apply(u0.values, rows)
        # pin the boundary node
        lo[-1] = 0.0
        di[-1] = 1.0
        rhs[-1] = -u0.values[-1] + gauge.harmonic_offset
        import scipy.linalg as sla

        ab = np.zeros((3, n))
        ab[0, 1:] = up[:-1]
        ab[1, :] = di
        ab[2, :-1] = lo[1:]
        # the origin+interior rows of L are rank-deficient only with the
        # boundary row removed; with the Dirichlet row the system is regular
        f = sla.solve_banded((1, 1), ab, rhs)
    else:
        from scipy.sparse.linalg import spsolve

        L = linsolve.cartesian_lap_csr(g).tolil()
        rhs = -(L @ u0.values)
        n = g.n
        bidx = [
            i * n + j
            for i in range(n)
            for j in range(n)
            if i in (0, n - 1) or j in (0, n - 1)
        ]
        for k in bidx:
            L.rows[k] = [k]
            L.data[k] = [1.0]
            rhs[k] = -u0.values[k] + gauge.harmonic_offset
        f = spsolve(L.tocsc(), rhs)
    f0 = ScalarField(g, f)
    resid = float(np.abs((laplacian(f0).values + rhs_field.values)[_interior(g)]).max())
    if resid >= POISSON_RESIDUAL_TOL:
        raise PoissonNotConverged(f"residual {resid:.3e}")
    f0_boundedness_warning(f0)
    return f0


def _interior(g: GridSpec) -> np.ndarray:
    mask = np.ones(g.node_count, dtype=bool)
    if g.kind == RADIAL:
        mask[-1] = False
    else:
        m2 = mask.reshape(g.n, g.n)
        m2[0, :] = m2[-1, :] = False
        m2[:, 0] = m2[:, -1] = False
    return mask


def step_heat_explicit(f: ScalarField, m: ConformalField, dt: float) -> ScalarField:
    """One forward-Euler heat step f += dt e^{-u} lap f on the frozen metric.

    The caller supplies the flow's dt (same CFL constraint; e^{-u} is the
    shared diffusivity)."""
    g = f.grid
    q = np.exp(-m.u.values)
    lap = linsolve.lap_apply_for_solver(f.values, g)
    return ScalarField(g, f.values + dt * q * lap)


def step_heat_implicit(f: ScalarField, m: ConformalField, dt: float) -> ScalarField:
    """Backward Euler on the frozen metric; unconditionally stable and, on
    radial grids, an M-matrix (nodewise discrete maximum principle)."""
    g = f.grid
    q = np.exp(-m.u.values)
    if g.kind == RADIAL:
        out = linsolve.radial_backward_euler_solve(
            f.values.copy(), q, dt, linsolve.radial_lap_rows(g)
        )
    else:
        out = linsolve.cartesian_backward_euler_solve(f.values.copy(), q, dt, g)
    return ScalarField(g, out)


def identity_residual(f: ScalarField, m: ConformalField) -> float:
    """sup over interior nodes of |e^{-u} lap f - R|."""
    R = scalar_curvature(m)
    lapf = laplacian(f)
    resid = np.exp(-m.u.values) * lapf.values - R.values
    return float(np.abs(resid[_interior(f.grid)]).max())


def grad_sq_metric(f: ScalarField, m: ConformalField) -> np.ndarray:
    """|grad f|^2 in the metric e^u g_E (= e^{-u} |grad f|^2_E)."""
    return np.exp(-m.u.values) * grad_sq_euclid(f).values


def monotone_quantity(f: ScalarField, m: ConformalField, t: float) -> ScalarField:
    """F = t |grad f|_g^2 + f^2."""
    return ScalarField(f.grid, t * grad_sq_metric(f, m) + f.values**2)


def max_principle_check(sup_abs_f: np.ndarray, h: float, rtol: float = 1e-6):
    """True iff sup|f(t)| <= sup|f(0)| (1 + rtol) + 10 h^2 at every recorded
    time; returns (ok, worst_excess).  Non-finite entries count as
    violations of unbounded size (a blown-up history must never pass)."""
    sup_abs_f = np.asarray(sup_abs_f, dtype=float)
    if not np.isfinite(sup_abs_f).all():
        return False, math.inf
    bound = sup_abs_f[0] * (1.0 + rtol) + 10.0 * h**2
    excess = sup_abs_f - bound
    worst = float(excess.max())
    return worst <= 0.0, max(worst, 0.0)
