import math

import numpy as np
import pytest

import ricci2d as r
from ricci2d.diagnostics import (
    DecayFit,
    ck_norm,
    diagnostic_grid,
    f_oscillation,
    fit_decay,
    flatness_verdict,
    gradient_invariance_check,
    rescale,
    rescale_state,
)
from ricci2d.errors import PullbackOutOfDomain, WindowTooShort
from ricci2d.grid import ScalarField
from ricci2d.series import TimeSeries


def cigar_metric(L, n, t=0.0):
    g = r.GridSpec(r.RADIAL, L, n)
    u = -np.log(np.exp(4 * t) + g.axis() ** 2)
    return r.ConformalField(r.ScalarField(g, u))


def test_rescale_constant_field():
    g = r.GridSpec(r.RADIAL, 10.0, 201)
    m = r.ConformalField(r.constant_field(g, 1.2))
    rs = rescale(m, 0.0, diagnostic_grid(r.RADIAL, 2.0, 65))
    assert np.abs(rs.u_hat.values).max() == 0.0
    assert rs.scale == pytest.approx(math.exp(-0.6))


def test_rescale_cigar_fixed_point():
    # the exact soliton pulls back to -log(1+a^2) at every time
    diag = diagnostic_grid(r.RADIAL, 4.0, 257)
    exact = -np.log(1 + diag.axis() ** 2)
    for t in (0.0, 0.5, 1.0):
        m = cigar_metric(40.0, 801, t)
        rs = rescale(m, t, diag)
        assert rs.scale == pytest.approx(math.exp(2 * t), rel=1e-12)
        assert np.abs(rs.u_hat.values - exact).max() < 5e-7
        assert rs.u_hat.values[0] == 0.0


def test_rescale_idempotent():
    m = cigar_metric(40.0, 801, 0.3)
    rs = rescale(m, 0.3, diagnostic_grid(r.RADIAL, 4.0, 257))
    again = rescale_state(rs)
    assert again.scale == 1.0
    assert np.abs(again.u_hat.values - rs.u_hat.values).max() < 1e-12


def test_rescale_out_of_domain():
    m = cigar_metric(10.0, 201, 1.0)  # scale e^2 ~ 7.39, 7.39*4 > 10
    with pytest.raises(PullbackOutOfDomain) as exc:
        rescale(m, 1.0, diagnostic_grid(r.RADIAL, 4.0, 65))
    assert exc.value.max_admissible == pytest.approx(10.0 / math.exp(2.0), rel=1e-6)


def test_ck_norm_closed_form():
    diag = diagnostic_grid(r.RADIAL, 4.0, 257)
    zero = r.RescaledState(ScalarField(diag, np.zeros(257)), 1.0, 0.0)
    assert ck_norm(zero, 2, 2.0) == 0.0
    cig = r.RescaledState(ScalarField(diag, -np.log(1 + diag.axis() ** 2)), 1.0, 0.0)
    assert ck_norm(cig, 0, 1.0) == pytest.approx(math.log(2.0), abs=1e-10)
    # k = 2 picks up the Hessian: at the origin |u''| = 2, norm sqrt(8)
    assert ck_norm(cig, 2, 1.0) == pytest.approx(math.sqrt(8.0), rel=1e-3)


def synthetic_series(t, q0, q1, q2):
    ts = TimeSeries()
    for i, ti in enumerate(t):
        ts.append(
            {
                "t": ti,
                "supR": math.sqrt(q0[i]),
                "supGradR2": q1[i],
                "supGrad2R2": q2[i],
                "supGradF2g": 0.0,
                "supF": 0.0,
                "area": 0.0,
                "u0": 0.0,
                "aperture": 1.0,
            }
        )
    return ts


def test_fit_decay_recovers_exact_power_laws():
    t = np.geomspace(1.0, 1e3, 40)
    q = {k: (1 + t) ** -(k + 2) for k in (0, 1, 2)}
    ts = synthetic_series(t, q[0], q[1], q[2])
    for k in (0, 1, 2):
        fit = fit_decay(ts, k)
        assert abs(fit.slope + (k + 2)) < 1e-6
        assert fit.residual < 1e-9
        assert fit.explosion_ratio == pytest.approx(1.0, abs=1e-9)
        assert fit.passes


def test_fit_decay_rejects_slow_decay():
    t = np.geomspace(1.0, 1e3, 40)
    flatq = np.ones_like(t)
    ts = synthetic_series(t, flatq, flatq, flatq)
    fit = fit_decay(ts, 0)
    assert fit.slope == pytest.approx(0.0, abs=1e-9)
    assert not fit.passes


def test_fit_decay_overperformance_passes():
    # much faster decay than the proved bound must still pass (one-sided)
    t = np.geomspace(1.0, 1e3, 40)
    q = (1 + t) ** -4.0
    ts = synthetic_series(t, q, q, q)
    fit = fit_decay(ts, 0)
    assert fit.slope < -3.9
    assert fit.explosion_ratio <= 1.0 + 1e-12
    assert fit.passes


def test_fit_decay_window_too_short():
    t = np.geomspace(1.0, 5.0, 20)
    q = (1 + t) ** -2.0
    ts = synthetic_series(t, q, q, q)
    with pytest.raises(WindowTooShort):
        fit_decay(ts, 0)
    t2 = np.geomspace(1.0, 1e3, 8)
    ts2 = synthetic_series(t2, (1 + t2) ** -2, (1 + t2) ** -2, (1 + t2) ** -2)
    with pytest.raises(WindowTooShort):
        fit_decay(ts2, 0)


def test_fit_decay_zero_signal():
    t = np.geomspace(1.0, 1e3, 40)
    z = np.zeros_like(t)
    ts = synthetic_series(t, z, z, z)
    fit = fit_decay(ts, 1)
    assert fit.zero_signal and fit.passes


def test_gradient_invariance_flat_with_test_field():
    errs = {}
    for h_inv in (128, 256):
        L = 8.0
        n = int(L * h_inv) + 1
        g = r.GridSpec(r.RADIAL, L, n)
        m = r.ConformalField(r.constant_field(g, 0.5))
        f = r.ScalarField(g, np.exp(-(g.axis() ** 2) / 3.0))
        diag = diagnostic_grid(r.RADIAL, 4.0, int(4.0 * h_inv) + 1)
        rs = rescale(m, 0.0, diag)
        errs[h_inv] = gradient_invariance_check(m, f, rs, radius=2.0)
    assert errs[128] <= 1e-3
    assert errs[128] / errs[256] == pytest.approx(4.0, abs=0.8)


def test_gradient_invariance_constant_f():
    g = r.GridSpec(r.RADIAL, 8.0, 257)
    m = r.ConformalField(r.constant_field(g, 0.3))
    f = r.constant_field(g, 9.0)
    rs = rescale(m, 0.0, diagnostic_grid(r.RADIAL, 4.0, 129))
    assert gradient_invariance_check(m, f, rs, 2.0) < 1e-13


def test_flatness_verdict_clauses():
    t = np.geomspace(0.01, 1e3, 40)
    good_fit = DecayFit(0, -2.5, 0.0, 1e-3, (1.0, 1e3), 1.0, 1.0)
    bad_fit = DecayFit(0, -0.5, 0.0, 1e-3, (1.0, 1e3), 1.0, 1.0)
    ck_drop = np.geomspace(1.0, 1e-4, 40)
    ck_flat = np.ones(40)
    rep = flatness_verdict([good_fit], t, ck_drop, ck_drop, t_end=1e3)
    assert rep.verdict == "PASS" and not rep.violated
    rep2 = flatness_verdict([good_fit], t, ck_flat, ck_drop, t_end=1e3)
    assert rep2.verdict == "FAIL" and rep2.violated == ["b_ck2_drop"]
    rep3 = flatness_verdict([bad_fit], t, ck_drop, ck_flat, t_end=1e3)
    assert set(rep3.violated) == {"a_decay_fits", "c_f_flattens"}
    # all-zero run passes trivially
    z = np.zeros(40)
    zfit = DecayFit(0, -math.inf, -math.inf, 0.0, (1.0, 1e3), 0.0, 1.0, True)
    rep4 = flatness_verdict([zfit], t, z, z, t_end=1e3)
    assert rep4.verdict == "PASS"
    # report serialises to JSON
    import json

    payload = json.loads(rep4.to_json())
    assert payload["verdict"] == "PASS"


def test_f_oscillation():
    g = r.GridSpec(r.RADIAL, 8.0, 65)
    f = np.linspace(0.0, 2.0, 65)
    assert f_oscillation(g, f, 4.0) == pytest.approx(1.0)
