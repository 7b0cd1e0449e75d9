import numpy as np
import pytest

import ricci2d as r
from ricci2d.errors import ParameterOutOfRange
from ricci2d.flow import run_flow
from ricci2d.potential import PotentialGauge, solve_initial_potential
from ricci2d.potential_flow import (
    PotentialFlowState,
    equivalence_defect,
    reconstruct_u,
)
from ricci2d.scenarios import EXPLICIT_CFL, build


def test_compatibility_guard():
    g = r.GridSpec(r.RADIAL, 8.0, 65)
    u0 = r.ConformalField(r.ScalarField(g, np.exp(-(g.axis() ** 2))))
    bad_f0 = r.ScalarField(g, np.sin(g.axis()))  # lap(u0 + f0) != 0
    with pytest.raises(ParameterOutOfRange):
        PotentialFlowState.create(u0, bad_f0)
    good_f0 = r.ScalarField(g, -u0.u.values + 3.0)
    p = PotentialFlowState.create(u0, good_f0)
    assert np.abs(p.psi.values).max() == 0.0


def test_defect_zero_at_start_and_flat():
    g = r.GridSpec(r.RADIAL, 8.0, 65)
    u0 = r.ConformalField(r.constant_field(g, 0.0))
    f0 = solve_initial_potential(u0, PotentialGauge())
    p = PotentialFlowState.create(u0, f0)
    assert equivalence_defect(p, u0) == 0.0
    # flat scenario: psi stays zero, defect exactly zero for all time
    sc = build("Flat", t_end=1.0, n=64, extent=8.0)
    res = run_flow(sc)
    assert np.abs(res.series.column("defect")).max() == 0.0
    for _, _, psi in res.snapshots:
        assert np.abs(psi).max() == 0.0


def test_cigar_psi_origin_quadratic_in_time():
    # NegU0 gauge: d psi/dt = u, so psi(0, t) = -2 t^2 for the soliton
    sc = build("Cigar", extent=10.0, n=201, t_end=0.4)
    res = run_flow(sc)
    t = res.series.t
    psi0 = np.array([psi[0] for _, _, psi in res.snapshots])
    dt_max_run = np.nanmax(res.series.column("dt_last"))
    tol = 4 * (dt_max_run + sc.grid.h**2) * np.maximum(t, 0.05)
    assert np.all(np.abs(psi0 + 2 * t**2) <= tol)


def test_psi_rate_reproduces_f():
    # f = -(d psi / dt) = -(u - u0 - f0): with f0 = -u0 this is sup|f + u|
    sc = build("GaussianBump", extent=8.0, n=161, t_end=0.2, scheme=EXPLICIT_CFL)
    res = run_flow(sc)
    for u, f, _ in res.snapshots:
        assert np.abs(f + u - res.u0 - res.f0).max() < 1e-12


def test_defect_small_and_halving_on_refinement():
    errs = {}
    for n in (513, 725):
        sc = build("GaussianBump", extent=16.0, n=n, t_end=0.25,
                   scheme=EXPLICIT_CFL)
        res = run_flow(sc)
        errs[n] = res.series.column("defect")[-1]
    # halving h^2 (and with it the CFL dt) should halve the defect
    ratio = errs[513] / errs[725]
    assert 1.4 <= ratio <= 2.6


def test_defect_non_accumulating():
    sc = build("GaussianBump", extent=8.0, n=161, t_end=0.5, scheme=EXPLICIT_CFL)
    res = run_flow(sc)
    d = res.series.column("defect")[1:]
    steps = res.series.column("step_count")[1:]
    dtl = res.series.column("dt_last")[1:]
    supR0 = res.series.column("supR")[0]
    h2 = sc.grid.h**2
    bound = 10 * dtl * (dtl + h2) * supR0 * steps
    assert np.all(d <= np.maximum(bound, 1e-14))


def test_reconstruction_matches_u():
    sc = build("GaussianBump", extent=8.0, n=161, t_end=0.5, scheme=EXPLICIT_CFL)
    res = run_flow(sc)
    u_end, _, psi_end = res.snapshots[-1]
    g = sc.grid
    u0 = r.ConformalField(r.ScalarField(g, res.u0))
    p = PotentialFlowState.create(u0, r.ScalarField(g, res.f0))
    p.psi = r.ScalarField(g, psi_end)
    u_rec = reconstruct_u(p)
    dt_run = np.nanmax(res.series.column("dt_last"))
    v_min = np.exp(u_end.min())
    tol = 10 * (dt_run + g.h**2) / v_min
    inner = np.ones(g.n, dtype=bool)
    inner[-1] = False
    assert np.abs((u_rec.values - u_end)[inner]).max() <= tol
