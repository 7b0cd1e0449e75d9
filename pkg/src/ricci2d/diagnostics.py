"""Rescaling diagnostics and convergence-to-flat evidence.

The flow is pulled back by the coordinate dilation a -> x = scale * a with
scale = e^{-u(0,t)/2}, giving the normalised exponent
u_hat(a, t) = u(scale a, t) - u(0, t) on a fixed diagnostic grid.  A run
converges to the flat plane when (a) the curvature sup norms decay at least
at the rates sup|grad^k R|^2 <= C_k (1+t)^{-(k+2)}, (b) the C^2 size of
u_hat on a compact set collapses, and (c) the potential f flattens to a
constant.  The soliton is the stationary point of this rescaling, so it is
the canonical non-converging control.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .errors import ParameterOutOfRange, PullbackOutOfDomain, WindowTooShort
from .grid import RADIAL, ConformalField, GridSpec, ScalarField
from .series import TimeSeries

ZERO_SIGNAL_FLOOR = 1e-250
FLATNESS_ABS_FLOOR = 1e-12
DECAY_SLOPE_SLACK = 0.5
DECAY_EXPLOSION_RATIO = 10.0


# ---------------------------------------------------------------------------
# rescaling

@dataclass
class RescaledState:
    u_hat: ScalarField   # on the diagnostic grid, u_hat(0) = 0 exactly
    scale: float
    t: float


def diagnostic_grid(kind: str = RADIAL, a_max: float = 4.0, n: int = 257) -> GridSpec:
    return GridSpec(kind=kind, extent=a_max, n=n)


def _radial_spline(grid: GridSpec, values: np.ndarray) -> CubicSpline:
    # even symmetry at the origin: clamped left end
    return CubicSpline(grid.axis(), values, bc_type=((1, 0.0), "not-a-knot"))


def sample_field(m_grid: GridSpec, values: np.ndarray, points: np.ndarray):
    """Interpolate a field at Euclidean radii (radial: cubic spline) or at
    (x, y) rows (Cartesian: bilinear)."""
    if m_grid.kind == RADIAL:
        return _radial_spline(m_grid, values)(np.abs(points))
    half = m_grid.extent
    h = m_grid.h
    ci = (points[:, 1] + half) / h
    cj = (points[:, 0] + half) / h
    return map_coordinates(values.reshape(m_grid.n, m_grid.n), [ci, cj], order=1)


def rescale(m: ConformalField, t: float, diag: Optional[GridSpec] = None) -> RescaledState:
    """Pull the metric back by the dilation with scale e^{-u(0,t)/2}."""
    g = m.grid
    if diag is None:
        diag = diagnostic_grid(g.kind)
    if diag.kind != g.kind:
        raise ParameterOutOfRange("diagnostic grid kind must match the flow grid")
    u = m.u.values
    if g.kind == RADIAL:
        u_origin = float(u[0])
    else:
        u_origin = float(u.reshape(g.n, g.n)[g.n // 2, g.n // 2])
    scale = math.exp(-u_origin / 2.0)
    if scale * diag.extent > g.extent * (1 + 1e-12):
        raise PullbackOutOfDomain(g.extent / scale)

    if g.kind == RADIAL:
        pts = scale * diag.axis()
        vals = sample_field(g, u, pts)
    else:
        X, Y = diag.meshgrid()
        pts = np.column_stack([scale * X.ravel(), scale * Y.ravel()])
        vals = sample_field(g, u, pts)
    u_hat = vals - u_origin
    if g.kind == RADIAL:
        u_hat[0] = 0.0
    else:
        u_hat = u_hat.reshape(diag.n, diag.n)
        u_hat[diag.n // 2, diag.n // 2] = 0.0
        u_hat = u_hat.ravel()
    return RescaledState(u_hat=ScalarField(diag, u_hat), scale=scale, t=t)


def rescale_state(r: RescaledState) -> RescaledState:
    """Rescaling a rescaled state is the identity (u_hat(0) = 0, scale 1)."""
    return rescale(ConformalField(r.u_hat), r.t, r.u_hat.grid)


def ck_norm(r: RescaledState, k: int, radius: float) -> float:
    """max over |a| <= radius of |grad^j u_hat|, j = 0..k (central
    differences on the diagnostic grid)."""
    if k < 0 or k > 2:
        raise ParameterOutOfRange("ck_norm supports k in {0, 1, 2}")
    g = r.u_hat.grid
    if radius > g.extent * (1 + 1e-12):
        raise ParameterOutOfRange("radius exceeds the diagnostic grid")
    vals = r.u_hat.values
    h = g.h
    if g.kind == RADIAL:
        a = g.axis()
        mask = a <= radius
        out = float(np.abs(vals[mask]).max())
        if k >= 1:
            d1 = np.zeros_like(vals)
            d1[1:-1] = (vals[2:] - vals[:-2]) / (2 * h)
            d1[-1] = (3 * vals[-1] - 4 * vals[-2] + vals[-3]) / (2 * h)
            out = max(out, float(np.abs(d1[mask]).max()))
        if k >= 2:
            d2 = np.zeros_like(vals)
            d2[0] = 2.0 * (vals[1] - vals[0]) / h**2
            d2[1:-1] = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / h**2
            d2[-1] = (2 * vals[-1] - 5 * vals[-2] + 4 * vals[-3] - vals[-4]) / h**2
            ang = np.empty_like(d2)
            ang[0] = d2[0]
            ang[1:] = d1[1:] / a[1:]
            hess = np.sqrt(d2**2 + ang**2)
            out = max(out, float(np.abs(hess[mask]).max()))
        return out
    # Cartesian
    arr = vals.reshape(g.n, g.n)
    X, Y = g.meshgrid()
    mask = np.hypot(X, Y) <= radius
    out = float(np.abs(arr[mask]).max())
    if k >= 1:
        gy, gx = np.gradient(arr, h)
        out = max(out, float(np.hypot(gx, gy)[mask].max()))
    if k >= 2:
        gyy, gyx = np.gradient(gy, h)
        gxy, gxx = np.gradient(gx, h)
        hess = np.sqrt(gxx**2 + gyy**2 + 2 * (0.5 * (gxy + gyx)) ** 2)
        out = max(out, float(hess[mask].max()))
    return out


# ---------------------------------------------------------------------------
# decay fits

@dataclass
class DecayFit:
    k: int
    slope: float
    intercept: float
    residual: float
    window: tuple
    bound_constant: float
    explosion_ratio: float
    zero_signal: bool = False

    @property
    def passes(self) -> bool:
        if self.zero_signal:
            return True
        return (
            self.slope <= -(self.k + 2) + DECAY_SLOPE_SLACK
            and math.isfinite(self.bound_constant)
            and self.explosion_ratio <= DECAY_EXPLOSION_RATIO
        )


_FIT_COLUMNS = {0: "supR", 1: "supGradR2", 2: "supGrad2R2"}


def fit_decay(series: TimeSeries, k: int, window: Optional[tuple] = None) -> DecayFit:
    """Least-squares slope of log sup|grad^k R|^2 against log(1+t).

    The pass criterion is one-sided (proved decay is an upper bound, faster
    decay must pass): slope at most -(k+2) + 0.5 and a non-exploding bound
    constant, i.e. max over the window of (1+t)^{k+2} sup|grad^k R|^2 within
    a factor 10 of its max over the first (log-time) half of the window.
    """
    if k not in _FIT_COLUMNS:
        raise ParameterOutOfRange("fit_decay supports k in {0, 1, 2}")
    t = series.t
    q = series.column(_FIT_COLUMNS[k])
    if k == 0:
        q = q**2  # stored unsquared, fitted as sup|R|^2
    if window is None:
        window = (1.0, float(t[-1]))
    lo, hi = window
    mask = (t >= lo) & (t <= hi)
    if np.count_nonzero(mask) < 12:
        raise WindowTooShort(f"{np.count_nonzero(mask)} points in window {window}")
    tw = t[mask]
    qw = q[mask]
    span = math.log10((1 + tw[-1]) / (1 + tw[0]))
    if span < 1.5:
        raise WindowTooShort(f"window spans {span:.2f} decades of (1+t), need 1.5")
    if qw.max() < ZERO_SIGNAL_FLOOR:
        return DecayFit(k, -math.inf, -math.inf, 0.0, window, 0.0, 1.0, True)
    qw = np.maximum(qw, 1e-300)
    x = np.log1p(tw)
    y = np.log(qw)
    coef = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    C = (1 + tw) ** (k + 2) * qw
    mid = 0.5 * (math.log1p(tw[0]) + math.log1p(tw[-1]))
    first_half = C[np.log1p(tw) <= mid]
    explosion = float(C.max() / first_half.max())
    return DecayFit(
        k=k,
        slope=float(coef[0]),
        intercept=float(coef[1]),
        residual=resid,
        window=window,
        bound_constant=float(C.max()),
        explosion_ratio=explosion,
    )


# ---------------------------------------------------------------------------
# gradient invariance

def gradient_invariance_check(m: ConformalField, f: ScalarField,
                              r: RescaledState, radius: float) -> float:
    """Discretisation error of |grad f|_g = |grad (f o phi)|_{phi* g}.

    Both sides are analytically equal, so the sup over |a| <= radius of
    their difference is pure interpolation/differencing error.
    """
    g = m.grid
    diag = r.u_hat.grid
    if g.kind != RADIAL or diag.kind != RADIAL:
        raise ParameterOutOfRange("gradient invariance check runs on radial grids")
    a = diag.axis()
    mask = a <= radius
    pts = r.scale * a
    # flow side: |grad f|_g from the spline representation of f (the radial
    # profile of |f'| has a kink at the origin, so differentiate the smooth
    # spline rather than interpolating the norm)
    f_spline = _radial_spline(g, f.values)
    u_at = sample_field(g, m.u.values, pts)
    lhs = np.exp(-u_at / 2.0) * np.abs(f_spline(np.abs(pts), 1))

    fhat = sample_field(g, f.values, pts)
    hd = diag.h
    dfhat = np.zeros_like(fhat)
    dfhat[0] = 0.0
    dfhat[1:-1] = (fhat[2:] - fhat[:-2]) / (2 * hd)
    dfhat[-1] = (3 * fhat[-1] - 4 * fhat[-2] + fhat[-3]) / (2 * hd)
    rhs = np.exp(-r.u_hat.values / 2.0) * np.abs(dfhat)
    return float(np.abs((lhs - rhs)[mask]).max())


# ---------------------------------------------------------------------------
# flatness verdict

@dataclass
class FlatnessReport:
    verdict: str                      # "PASS" | "FAIL"
    clauses: dict = field(default_factory=dict)
    violated: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    ck2_initial: float = math.nan
    ck2_final: float = math.nan
    f_osc_initial: float = math.nan
    f_osc_final: float = math.nan
    reference_time: float = math.nan

    def to_json(self) -> str:
        payload = {
            "verdict": self.verdict,
            "clauses": self.clauses,
            "violated": self.violated,
            "reference_time": self.reference_time,
            "ck2": {"at_reference": self.ck2_initial, "at_end": self.ck2_final},
            "f_oscillation": {
                "at_reference": self.f_osc_initial,
                "at_end": self.f_osc_final,
            },
            "fits": [
                {
                    "k": f.k,
                    "slope": None if not math.isfinite(f.slope) else f.slope,
                    "residual": f.residual,
                    "bound_constant": f.bound_constant,
                    "explosion_ratio": f.explosion_ratio,
                    "window": list(f.window),
                    "zero_signal": f.zero_signal,
                    "passes": f.passes,
                }
                for f in self.fits
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def flatness_verdict(fits, times, ck2_history, f_osc_history, t_end) -> FlatnessReport:
    """PASS iff (a) every decay fit passes, (b) the C^2 norm of u_hat on the
    compact set drops by 10x between the reference time (first recorded
    t >= min(1, t_end)) and t_end, and (c) the oscillation of f on the
    compact set drops by 10x over the same span."""
    times = np.asarray(times)
    ck2 = np.asarray(ck2_history, dtype=float)
    fosc = np.asarray(f_osc_history, dtype=float)
    t_ref = min(1.0, t_end)
    iref = int(np.argmax(times >= t_ref * (1 - 1e-12)))
    report = FlatnessReport(verdict="FAIL", fits=list(fits))
    report.reference_time = float(times[iref])
    report.ck2_initial = float(ck2[iref])
    report.ck2_final = float(ck2[-1])
    report.f_osc_initial = float(fosc[iref])
    report.f_osc_final = float(fosc[-1])

    clause_a = all(f.passes for f in fits) and len(fits) > 0
    clause_b = report.ck2_final < max(0.1 * report.ck2_initial, FLATNESS_ABS_FLOOR)
    clause_c = report.f_osc_final < max(0.1 * report.f_osc_initial, FLATNESS_ABS_FLOOR)
    report.clauses = {"a_decay_fits": clause_a, "b_ck2_drop": clause_b,
                      "c_f_flattens": clause_c}
    report.violated = [k for k, ok in report.clauses.items() if not ok]
    report.verdict = "PASS" if not report.violated else "FAIL"
    return report


def f_oscillation(grid: GridSpec, f_values: np.ndarray, radius: float) -> float:
    """max over |x| <= radius of |f(x) - f(0)|."""
    r = grid.radii()
    mask = r <= radius
    f0 = f_values[0] if grid.kind == RADIAL else f_values.reshape(grid.n, grid.n)[
        grid.n // 2, grid.n // 2
    ]
    return float(np.abs(f_values[mask] - f0).max())
