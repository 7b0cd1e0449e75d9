"""Post-run diagnostics: rescaled snapshots, decay fits, flatness verdict.

Everything here is pure post-processing over the immutable snapshots a run
recorded, so recorded times can be processed in parallel (capped by the
RICCI2D_THREADS environment variable).
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import (
    FlatnessReport,
    ck_norm,
    diagnostic_grid,
    f_oscillation,
    fit_decay,
    flatness_verdict,
    rescale,
)
from .errors import SimulationError, WindowTooShort
from .flow import RunResult
from .grid import ConformalField, ScalarField
from .scenarios import GLOBAL


def _thread_count() -> int:
    raw = os.environ.get("RICCI2D_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class RunAnalysis:
    rescaled: list = field(default_factory=list)   # RescaledState per time
    ck2_history: np.ndarray = None
    f_osc_history: np.ndarray = None
    fits: list = field(default_factory=list)
    fit_errors: list = field(default_factory=list)
    flatness: Optional[FlatnessReport] = None


def analyze_run(result: RunResult) -> RunAnalysis:
    sc = result.scenario
    dcfg = sc.diagnostics
    diag = diagnostic_grid(sc.grid.kind, dcfg.a_max, dcfg.n_diag)
    grid = sc.grid
    out = RunAnalysis()

    def per_time(item):
        t, (u, f, _psi) = item
        m = ConformalField(ScalarField(grid, u))
        fo = f_oscillation(grid, f, grid.extent / 4.0)
        try:
            r = rescale(m, t, diag)
        except SimulationError:
            # pullback left the computed domain: no certificate at this time
            return None, float("nan"), fo
        return r, ck_norm(r, 2, dcfg.compact_radius), fo

    items = list(zip(result.snapshot_times, result.snapshots))
    nthreads = _thread_count()
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            rows = list(pool.map(per_time, items))
    else:
        rows = [per_time(it) for it in items]
    out.rescaled = [r for r, _, _ in rows]
    out.ck2_history = np.array([c for _, c, _ in rows])
    out.f_osc_history = np.array([o for _, _, o in rows])

    window = (dcfg.fit_t_min, float(result.series.t[-1]))
    for k in (0, 1, 2):
        try:
            out.fits.append(fit_decay(result.series, k, window))
        except WindowTooShort as err:
            out.fit_errors.append(str(err))

    out.flatness = flatness_verdict(
        out.fits if not out.fit_errors else [],
        result.snapshot_times,
        out.ck2_history,
        out.f_osc_history,
        t_end=float(result.series.t[-1]),
    )
    if out.fit_errors and "a_decay_fits" not in out.flatness.violated:
        out.flatness.violated.insert(0, "a_decay_fits")
        out.flatness.clauses["a_decay_fits"] = False
        out.flatness.verdict = "FAIL"
    return out


def flatness_applicable(result: RunResult) -> bool:
    return result.verdict.verdict == GLOBAL and result.stopped is None
