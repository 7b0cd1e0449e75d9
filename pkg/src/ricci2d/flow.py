"""Time integration of the conformal flow d/dt e^u = lap u.

Two schemes:

* ``ExplicitCFL``: forward Euler on u_t = e^{-u} lap u with
  dt = min(dt_max, theta h^2 min(e^u)/4) recomputed every step.
* ``ImplicitNewton``: backward Euler on the factor v = e^u,
  v_new - dt lap(log v_new) = v_old, solved by Newton iteration
  (tridiagonal direct solves on radial grids, sparse LU on Cartesian).
  Steps whose Newton iterates leave the positive cone are rejected and
  retried at half the step, at most 20 times.

``run_flow`` drives a scenario to t_end, co-evolving the potential f (heat
equation on the evolving metric, metric frozen over each step) and the
integrated potential psi, and records monitors at geometrically spaced
times t in {0.01 * 1.3^k}.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linsolve
from .errors import NewtonDiverged, ParameterOutOfRange, PositivityLost, SimulationError
from .geometry import aperture, conformal_area, scalar_curvature
from .grid import RADIAL, ConformalField, GridSpec, ScalarField
from .operators import grad_sq_euclid, hessian_sq_euclid, sup_norm
from .potential import (
    PotentialGauge,
    grad_sq_metric,
    identity_residual,
    monotone_quantity,
    solve_initial_potential,
    step_heat_explicit,
    step_heat_implicit,
)
from .potential_flow import PotentialFlowState, equivalence_defect
from .scenarios import EXPLICIT_CFL, FINITE_TIME, GLOBAL, Scenario, SolverConfig
from .series import TimeSeries

UNDETERMINED = "Undetermined"

RECORD_T0 = 0.01
RECORD_RATIO = 1.3
TAIL_FIT_RMS_TOL = 0.1
IMPLICIT_DT_GROWTH = 0.05  # implicit steps track dt ~ 5% of elapsed time
MAX_DT_HALVINGS = 20


@dataclass
class ExistenceVerdict:
    verdict: str
    area_inner: float
    tail_exponent: float
    fit_rms: float = 0.0


def classify_global_existence(m0: ConformalField) -> ExistenceVerdict:
    """Decide whether the maximal flow from u0 is global.

    The flow exists for all time iff the initial conformal area is infinite;
    numerically, fit e^{u0} ~ c rho^{-p} on the outer quarter of the domain
    and compare the tail exponent with 2 (the integrability threshold).
    A poor tail fit yields ``Undetermined`` rather than a hard failure.
    """
    g = m0.grid
    area_inner = conformal_area(m0, g.extent)
    if g.kind == RADIAL:
        rho = g.axis()
        u = m0.u.values
        mask = rho >= 0.75 * g.extent
        x = np.log(rho[mask])
        y = u[mask]  # log e^{u0}
    else:
        from scipy.ndimage import map_coordinates

        radii = np.linspace(0.75 * g.extent, g.extent * 0.999, 24)
        angles = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        R, T = np.meshgrid(radii, angles, indexing="ij")
        ci = (R * np.sin(T) + g.extent) / g.h
        cj = (R * np.cos(T) + g.extent) / g.h
        uvals = map_coordinates(
            m0.u.as_grid(), [ci.ravel(), cj.ravel()], order=1
        ).reshape(R.shape)
        x = np.log(radii)
        y = np.log(np.exp(uvals).mean(axis=1))
    if len(x) < 4:
        return ExistenceVerdict(UNDETERMINED, area_inner, math.nan, math.inf)
    coef = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    p = -float(coef[0])
    if resid > TAIL_FIT_RMS_TOL:
        return ExistenceVerdict(UNDETERMINED, area_inner, p, resid)
    verdict = GLOBAL if p <= 2.0 else FINITE_TIME
    return ExistenceVerdict(verdict, area_inner, p, resid)


@dataclass
class FlowState:
    t: float
    m: ConformalField
    f: Optional[ScalarField]
    pstate: Optional[PotentialFlowState]
    step_count: int = 0
    last_dt: float = math.nan
    r_accum: Optional[np.ndarray] = None   # trapezoid-in-time of R per node
    _lap_u: Optional[np.ndarray] = None    # cache: solver-view lap of current u

    @property
    def grid(self) -> GridSpec:
        return self.m.grid

    def lap_u(self) -> np.ndarray:
        if self._lap_u is None:
            self._lap_u = linsolve.lap_apply_for_solver(self.m.u.values, self.grid)
        return self._lap_u

    def curvature_now(self) -> np.ndarray:
        return -np.exp(-self.m.u.values) * self.lap_u()


def _check_positive(u: np.ndarray, t: float):
    if not np.isfinite(u).all() or (np.exp(np.minimum(u, 0.0)) <= 0.0).any():
        raise PositivityLost(t)


def _finish_step(s: FlowState, u_old: np.ndarray, u_new: np.ndarray, dt: float,
                 f_new: Optional[ScalarField]):
    """Common bookkeeping: potential, psi, curvature accumulation, counters."""
    R_old = -np.exp(-u_old) * s.lap_u()  # lap cache still holds u_old
    s.m.u.values = u_new
    s._lap_u = None
    R_new = s.curvature_now()
    if s.r_accum is not None:
        s.r_accum += 0.5 * dt * (R_old + R_new)
    if f_new is not None:
        s.f = f_new
    if s.pstate is not None:
        s.pstate.step(u_old, u_new, dt)
    s.t += dt
    s.last_dt = dt
    s.step_count += 1


def explicit_dt(s: FlowState, cfg: SolverConfig) -> float:
    v_min = float(np.exp(s.m.u.values.min()))
    return min(cfg.dt_max, cfg.cfl_fraction * s.grid.h**2 * v_min / 4.0)


def step_explicit(s: FlowState, cfg: SolverConfig, dt: Optional[float] = None) -> FlowState:
    """One forward-Euler step; dt defaults to the CFL bound."""
    if dt is None:
        dt = explicit_dt(s, cfg)
    u_old = s.m.u.values
    q = np.exp(-u_old)
    u_new = u_old + dt * q * s.lap_u()
    _check_positive(u_new, s.t + dt)
    f_new = step_heat_explicit(s.f, s.m, dt) if s.f is not None else None
    _finish_step(s, u_old, u_new, dt, f_new)
    return s


def step_implicit(s: FlowState, dt: float, cfg: SolverConfig) -> FlowState:
    """One backward-Euler step of v_t = lap log v at step size dt.

    Raises ``NewtonDiverged`` when the iteration exceeds newton_max_iter or
    an iterate leaves the positive cone; the caller halves dt and retries.
    """
    if dt <= 0:
        raise ParameterOutOfRange("dt must be positive")
    g = s.grid
    u_old = s.m.u.values
    v_old = np.exp(u_old)
    v = v_old.copy()
    converged = False
    for _ in range(cfg.newton_max_iter):
        logv = np.log(v)
        G = v - dt * linsolve.lap_apply_for_solver(logv, g) - v_old
        if float(np.abs(G).max()) < cfg.newton_tol:
            converged = True
            break
        if g.kind == RADIAL:
            delta = linsolve.radial_jacobian_solve(-G, v, dt, linsolve.radial_lap_rows(g))
        else:
            delta = linsolve.cartesian_jacobian_solve(-G, v, dt, g)
        v = v + delta
        if (v <= 0).any() or not np.isfinite(v).all():
            raise NewtonDiverged(f"iterate left the positive cone at t={s.t:.6g}")
    if not converged:
        raise NewtonDiverged(f"no convergence in {cfg.newton_max_iter} iterations")
    u_new = np.log(v)
    f_new = step_heat_implicit(s.f, s.m, dt) if s.f is not None else None
    _finish_step(s, u_old, u_new, dt, f_new)
    return s


def record_times(t_end: float, stride: int = 1) -> np.ndarray:
    """{0} + geometric times 0.01 * 1.3^k up to t_end + {t_end}."""
    ts = [0.0]
    k = 0
    while True:
        t = RECORD_T0 * RECORD_RATIO**k
        if t >= t_end * (1 - 1e-12):
            break
        if k % stride == 0:
            ts.append(t)
        k += 1
    ts.append(t_end)
    return np.array(ts)


@dataclass
class RunResult:
    scenario: Scenario
    verdict: ExistenceVerdict
    series: TimeSeries
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (u, f, psi) arrays per time
    u0: Optional[np.ndarray] = None
    f0: Optional[np.ndarray] = None
    stopped: Optional[tuple] = None  # (error code, t) when ended early
    weak_f0: bool = False

    def area_slope(self) -> float:
        """d(area)/dt from the recorded series (finite-area runs report it)."""
        t = self.series.t
        a = self.series.column("area")
        if len(t) < 2:
            return math.nan
        return float(np.polyfit(t, a, 1)[0])


def _origin_value(g: GridSpec, values: np.ndarray) -> float:
    if g.kind == RADIAL:
        return float(values[0])
    return float(values.reshape(g.n, g.n)[g.n // 2, g.n // 2])


def _record(result: RunResult, s: FlowState):
    g = s.grid
    m = s.m
    R = scalar_curvature(m)
    gradR2 = grad_sq_euclid(R)
    hessR2 = hessian_sq_euclid(R)
    f = s.f
    gf2g = grad_sq_metric(f, m)
    F = monotone_quantity(f, m, s.t)
    try:
        ap = aperture(m).value if g.kind == RADIAL and not g.stretched else math.nan
    except SimulationError:
        ap = math.nan
    row = {
        "t": s.t,
        "supR": sup_norm(R),
        "supGradR2": float(gradR2.values.max()),
        "supGrad2R2": float(hessR2.values.max()),
        "supGradF2g": float(gf2g.max()),
        "supF": float(F.values.max()),
        "area": conformal_area(m, g.extent),
        "u0": _origin_value(g, m.u.values),
        "aperture": ap,
    }
    frec_err = float(np.abs(result.f0 + s.r_accum - f.values).max())
    result.series.append(
        row,
        sup_abs_f=float(np.abs(f.values).max()),
        identity_residual=identity_residual(f, m),
        defect=equivalence_defect(s.pstate, m),
        f_reconstruction_err=frec_err,
        dt_last=s.last_dt,
        step_count=s.step_count,
    )
    result.snapshot_times.append(s.t)
    result.snapshots.append(
        (m.u.values.copy(), f.values.copy(), s.pstate.psi.values.copy())
    )


def _advance_explicit(s: FlowState, cfg: SolverConfig, T: float):
    while s.t < T * (1 - 1e-14):
        dt = min(explicit_dt(s, cfg), T - s.t)
        step_explicit(s, cfg, dt=dt)
    s.t = T


def _advance_implicit(s: FlowState, cfg: SolverConfig, T: float, dt_seed: float):
    while s.t < T * (1 - 1e-14):
        dt_policy = max(dt_seed, IMPLICIT_DT_GROWTH * s.t)
        dt = min(cfg.dt_max, T - s.t, dt_policy)
        for _ in range(MAX_DT_HALVINGS + 1):
            try:
                step_implicit(s, dt, cfg)
                break
            except NewtonDiverged:
                dt *= 0.5
        else:
            raise NewtonDiverged(
                f"step rejected after {MAX_DT_HALVINGS} halvings at t={s.t:.6g}"
            )
    s.t = T


def run_flow(scenario: Scenario, allow_extinction: bool = False) -> RunResult:
    """Run a scenario to t_end recording monitors, f, psi and snapshots.

    Finite-time (finite initial area) scenarios require ``allow_extinction``;
    such runs may stop early at positivity loss and report where.
    """
    import warnings as _warnings

    cfg = scenario.solver
    if scenario.grid.stretched:
        raise SimulationError(
            "config-error",
            "flow solvers need a uniform grid; stretched radial grids are "
            "for aperture studies (classify/aperture subcommands)",
        )
    m0 = scenario.initial_u()
    verdict = classify_global_existence(m0)
    if verdict.verdict != GLOBAL and not allow_extinction:
        raise SimulationError(
            "extinction-guard",
            "initial conformal area is finite, so the flow only exists for "
            "finite time; pass --allow-extinction to run it anyway "
            f"(truncated area {verdict.area_inner:.6g}, "
            f"tail exponent {verdict.tail_exponent:.3g})",
        )

    gauge = PotentialGauge(scenario.gauge.kind, scenario.gauge.harmonic_offset)
    weak_f0 = False
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        f0 = solve_initial_potential(m0, gauge)
        weak_f0 = any("f0-unbounded" in str(w.message) for w in caught)

    u0 = m0.u.values.copy()
    state = FlowState(
        t=0.0,
        m=ConformalField(ScalarField(m0.grid, u0.copy())),
        f=f0.copy(),
        pstate=PotentialFlowState.create(m0, f0),
        r_accum=np.zeros(m0.grid.node_count),
    )
    result = RunResult(
        scenario=scenario,
        verdict=verdict,
        series=TimeSeries(),
        u0=u0,
        f0=f0.values.copy(),
        weak_f0=weak_f0,
    )

    schedule = record_times(cfg.t_end, cfg.monitor_stride)
    dt_seed = min(cfg.dt_max, cfg.cfl_fraction * m0.grid.h**2
                  * float(np.exp(u0.min())) / 4.0)
    _record(result, state)  # t = 0
    for T in schedule[1:]:
        try:
            if cfg.scheme == EXPLICIT_CFL:
                _advance_explicit(state, cfg, T)
            else:
                _advance_implicit(state, cfg, T, dt_seed)
        except (PositivityLost, NewtonDiverged) as err:
            if not allow_extinction:
                raise
            code = getattr(err, "code", "newton-diverged")
            result.stopped = (code, state.t)
            break
        _record(result, state)
    return result
