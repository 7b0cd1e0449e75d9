import numpy as np
import pytest

import ricci2d as r
from ricci2d import kernels
from ricci2d.errors import NewtonDiverged, PositivityLost, SimulationError
from ricci2d.flow import (
    FlowState,
    UNDETERMINED,
    classify_global_existence,
    explicit_dt,
    record_times,
    run_flow,
    step_explicit,
    step_implicit,
)
from ricci2d.scenarios import (
    EXPLICIT_CFL,
    FINITE_TIME,
    GLOBAL,
    IMPLICIT_NEWTON,
    SolverConfig,
    build,
)


def radial_state(L, n, u_fn):
    g = r.GridSpec(r.RADIAL, L, n)
    u = u_fn(g.axis())
    return FlowState(t=0.0, m=r.ConformalField(r.ScalarField(g, u)), f=None, pstate=None)


def cigar_u(rho):
    return -np.log(1 + rho**2)


# ---------------------------------------------------------------------------
# existence classifier

@pytest.mark.parametrize(
    "name,kwargs,expected",
    [
        ("Flat", {}, GLOBAL),
        ("GaussianBump", {}, GLOBAL),
        ("Cigar", {}, GLOBAL),
        ("Cone", {"beta": 0.5}, GLOBAL),
        ("FiniteArea", {"p": 1.0}, GLOBAL),
        ("FiniteArea", {"p": 2.0}, FINITE_TIME),
        ("FiniteArea", {"p": 3.0}, FINITE_TIME),
    ],
)
def test_classifier_family(name, kwargs, expected):
    sc = build(name, **kwargs)
    v = classify_global_existence(sc.initial_u())
    assert v.verdict == expected


def test_classifier_finite_area_two_matches_pi():
    sc = build("FiniteArea", p=2.0)
    v = classify_global_existence(sc.initial_u())
    L = sc.grid.extent
    tail = np.pi / (1 + L**2)
    assert v.area_inner + tail == pytest.approx(np.pi, abs=5e-3)
    assert v.tail_exponent == pytest.approx(4.0, abs=0.05)


def test_classifier_gaussian_bump_tail_flat():
    sc = build("GaussianBump")
    v = classify_global_existence(sc.initial_u())
    assert abs(v.tail_exponent) < 0.05


def test_classifier_undetermined_on_wiggly_tail():
    g = r.GridSpec(r.RADIAL, 64.0, 513)
    rho = g.axis()
    u = np.sin(12 * np.log(np.maximum(rho, 0.1))) * 2.0
    v = classify_global_existence(r.ConformalField(r.ScalarField(g, u)))
    assert v.verdict == UNDETERMINED


def test_classifier_cartesian_bump():
    g = r.GridSpec(r.CARTESIAN, 32.0, 129)
    rr = g.radii()
    m = r.ConformalField(r.ScalarField(g, np.exp(-(rr**2) / 4)))
    assert classify_global_existence(m).verdict == GLOBAL


# ---------------------------------------------------------------------------
# explicit scheme

def test_explicit_constant_stationary():
    s = radial_state(5.0, 65, lambda rho: np.full_like(rho, 0.7))
    cfg = SolverConfig(scheme=EXPLICIT_CFL, t_end=1.0)
    u_before = s.m.u.values.copy()
    for _ in range(25):
        step_explicit(s, cfg)
    assert np.abs(s.m.u.values - u_before).max() < 1e-13


def test_explicit_cfl_formula():
    s = radial_state(5.0, 65, cigar_u)
    cfg = SolverConfig(scheme=EXPLICIT_CFL, t_end=1.0, cfl_fraction=0.5, dt_max=np.inf)
    h = s.grid.h
    v_min = np.exp(s.m.u.values.min())
    assert explicit_dt(s, cfg) == pytest.approx(0.5 * h**2 * v_min / 4.0)
    cfg2 = SolverConfig(scheme=EXPLICIT_CFL, t_end=1.0, dt_max=1e-9)
    assert explicit_dt(s, cfg2) == 1e-9


def test_explicit_cigar_one_step():
    s = radial_state(5.0, 101, cigar_u)
    cfg = SolverConfig(scheme=EXPLICIT_CFL, t_end=1.0)
    dt = explicit_dt(s, cfg)
    h = s.grid.h
    step_explicit(s, cfg)
    assert abs(s.m.u.values[0] + 4 * dt) <= dt * (3 * h**2 + 10 * dt)


def test_explicit_bump_origin_decreases():
    s = radial_state(8.0, 161, lambda rho: np.exp(-(rho**2) / 4))
    cfg = SolverConfig(scheme=EXPLICIT_CFL, t_end=1.0)
    u0_origin = s.m.u.values[0]
    step_explicit(s, cfg)
    assert s.m.u.values[0] < u0_origin


def test_explicit_positivity_lost_detected():
    s = radial_state(5.0, 65, cigar_u)
    cfg = SolverConfig(scheme=EXPLICIT_CFL, t_end=1.0, dt_max=np.inf)
    with pytest.raises(PositivityLost):
        for _ in range(50):
            step_explicit(s, cfg, dt=1.0)  # far beyond the CFL bound


def test_kernel_matches_reference_steps():
    L, n, T = 5.0, 101, 0.01
    g = r.GridSpec(r.RADIAL, L, n)
    u0 = cigar_u(g.axis())
    s = FlowState(t=0.0, m=r.ConformalField(r.ScalarField(g, u0.copy())),
                  f=None, pstate=None)
    cfg = SolverConfig(scheme=EXPLICIT_CFL, t_end=T)
    nref = 0
    while s.t < T * (1 - 1e-14):
        dt = min(explicit_dt(s, cfg), T - s.t)
        step_explicit(s, cfg, dt=dt)
        nref += 1
    u_k = u0.copy()
    t_k, steps = kernels.advance_explicit_radial(
        u_k, g.axis(), g.h, 0.5, np.inf, 0.0, T)
    assert steps == nref
    assert t_k == pytest.approx(T)
    assert np.abs(u_k - s.m.u.values).max() < 1e-10


# ---------------------------------------------------------------------------
# implicit scheme

def test_implicit_constant_fixed_point():
    s = radial_state(5.0, 65, lambda rho: np.full_like(rho, -0.3))
    cfg = SolverConfig(scheme=IMPLICIT_NEWTON, t_end=1.0)
    u_before = s.m.u.values.copy()
    step_implicit(s, 0.5, cfg)
    assert np.array_equal(s.m.u.values, u_before)  # converges before any solve


def test_implicit_cigar_convergence_halving():
    # error against the exact soliton at fixed t halves when dt and h^2 halve
    def run(L, n, dt, t_end):
        s = radial_state(L, n, cigar_u)
        cfg = SolverConfig(scheme=IMPLICIT_NEWTON, t_end=t_end)
        for _ in range(int(round(t_end / dt))):
            step_implicit(s, dt, cfg)
        rho = s.grid.axis()
        exact = -np.log(np.exp(4 * s.t) + rho**2)
        mask = rho <= L / 2  # inner region: away from the frozen-boundary offset
        return np.abs(s.m.u.values - exact)[mask].max()

    L, t_end = 20.0, 0.05
    e1 = run(L, 2001, 1e-3, t_end)
    e2 = run(L, 2829, 5e-4, t_end)
    assert e1 / e2 == pytest.approx(2.0, abs=0.6)


def test_implicit_finite_area_monotone():
    sc = build("FiniteArea", p=2.0, n=513, extent=32.0)
    s = FlowState(t=0.0, m=sc.initial_u(), f=None, pstate=None)
    cfg = SolverConfig(scheme=IMPLICIT_NEWTON, t_end=1.0)
    areas = [r.conformal_area(s.m, 32.0)]
    for _ in range(12):
        step_implicit(s, 0.005, cfg)
        areas.append(r.conformal_area(s.m, 32.0))
    assert np.all(np.diff(areas) < 0)


def test_implicit_positivity_preserving_large_dt():
    # no positivity trouble for dt up to 1e3 h^2 on a Global scenario
    s = radial_state(16.0, 129, lambda rho: np.exp(-(rho**2) / 4))
    h = s.grid.h
    cfg = SolverConfig(scheme=IMPLICIT_NEWTON, t_end=10.0)
    for _ in range(5):
        step_implicit(s, 1e3 * h**2, cfg)
        assert np.isfinite(s.m.u.values).all()
        assert np.exp(s.m.u.values).min() > 0


def test_implicit_newton_diverged_on_absurd_state():
    s = radial_state(5.0, 65, cigar_u)
    cfg = SolverConfig(scheme=IMPLICIT_NEWTON, t_end=1.0, newton_max_iter=1)
    with pytest.raises(NewtonDiverged):
        step_implicit(s, 10.0, cfg)


# ---------------------------------------------------------------------------
# run orchestration

def test_record_times_schedule():
    ts = record_times(1.0)
    assert ts[0] == 0.0 and ts[-1] == 1.0
    geo = ts[1:-1]
    assert geo[0] == pytest.approx(0.01)
    assert np.allclose(np.diff(np.log(geo)), np.log(1.3))
    ts2 = record_times(1.0, stride=2)
    assert len(ts2) < len(ts)


def test_run_flow_flat_all_monitors_zero():
    sc = build("Flat", t_end=2.0, n=64, extent=8.0)
    res = run_flow(sc)
    for col in ("supR", "supGradR2", "supGrad2R2", "supGradF2g", "supF"):
        assert np.abs(res.series.column(col)).max() == 0.0
    area = res.series.column("area")
    assert np.allclose(area, np.pi * 8.0**2, rtol=1e-3)
    assert np.all(res.series.column("u0") == 0.0)


def test_run_flow_cigar_origin_tracks_exact():
    sc = build("Cigar", extent=10.0, n=201, t_end=0.5)
    res = run_flow(sc)
    err = np.abs(res.series.column("u0") + 4 * res.series.t)
    dt_max_run = np.nanmax(res.series.column("dt_last"))
    assert err.max() <= 2.0 * (dt_max_run + sc.grid.h**2)


def test_run_flow_cigar_curvature_sign_preserved():
    sc = build("Cigar", extent=10.0, n=201, t_end=0.5)
    res = run_flow(sc)
    h2 = sc.grid.h**2
    for u, _, _ in res.snapshots:
        R = r.scalar_curvature(r.ConformalField(r.ScalarField(sc.grid, u)))
        assert R.values.min() >= -10 * h2


def test_run_flow_extinction_guard():
    sc = build("FiniteArea", p=2.0, n=257, extent=32.0, t_end=0.05)
    with pytest.raises(SimulationError) as exc:
        run_flow(sc)
    assert exc.value.code == "extinction-guard"
    res = run_flow(sc, allow_extinction=True)
    assert res.verdict.verdict == FINITE_TIME
    assert res.area_slope() < 0


def test_run_flow_truncation_sensitivity():
    # doubling the domain at fixed h barely moves the solution at the origin
    out = {}
    for L, n in ((16.0, 257), (32.0, 513)):
        sc = build("GaussianBump", extent=L, n=n, t_end=1.0)
        out[L] = run_flow(sc).series.column("u0")[-1]
    assert abs(out[16.0] - out[32.0]) < 1e-6


def test_radial_cartesian_agreement():
    t_end = 0.1
    scr = build("GaussianBump", extent=8.0, n=81, t_end=t_end,
                scheme=EXPLICIT_CFL)
    res_r = run_flow(scr)
    g = r.GridSpec(r.CARTESIAN, 8.0, 129)
    u0 = np.exp(-(g.radii() ** 2) / 4.0)
    scc = build("GaussianBump", kind=r.CARTESIAN, extent=8.0, n=129,
                t_end=t_end, scheme=EXPLICIT_CFL)
    res_c = run_flow(scc)
    u_r = res_r.snapshots[-1][0]
    u_c = res_c.snapshots[-1][0].reshape(129, 129)
    h_c = g.h
    h_r = scr.grid.h
    ax = g.axis()
    mid = 129 // 2
    tol = 3 * (h_c + h_r**2)
    for j in range(mid, 129):
        rho = abs(ax[j])
        u_interp = np.interp(rho, scr.grid.axis(), u_r)
        assert abs(u_c[mid, j] - u_interp) < tol


def test_bump_curvature_sup_collapses():
    sc = build("GaussianBump", extent=32.0, n=513, t_end=100.0)
    res = run_flow(sc)
    supR = res.series.column("supR")
    assert supR[-1] < 0.05 * supR[0]
    assert np.all(np.diff(supR) <= 1e-3 * supR[:-1] + 1e-15)
