"""Named initial-data families with closed-form metadata.

Each family fixes u0 on a grid together with whatever is known exactly about
it: the existence class of the maximal flow (infinite initial area runs
forever, finite area goes extinct), the aperture, the initial curvature
profile, and, for the soliton, the exact solution
u(x, t) = -log(e^{4t} + |x|^2).
"""

import configparser
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    NoExactSolution,
    ParameterOutOfRange,
    UnknownScenario,
)
from .grid import RADIAL, ConformalField, GridSpec, ScalarField

GLOBAL = "Global"
FINITE_TIME = "FiniteTime"

EXPLICIT_CFL = "ExplicitCFL"
IMPLICIT_NEWTON = "ImplicitNewton"


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = IMPLICIT_NEWTON
    dt_max: float = np.inf
    cfl_fraction: float = 0.5
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    t_end: float = 1.0
    monitor_stride: int = 1

    def __post_init__(self):
        if self.scheme not in (EXPLICIT_CFL, IMPLICIT_NEWTON):
            raise ParameterOutOfRange(f"unknown scheme {self.scheme!r}")
        if not (self.dt_max > 0 and self.newton_tol > 0 and self.t_end > 0):
            raise ParameterOutOfRange("dt_max, newton_tol, t_end must be positive")
        if not (0 < self.cfl_fraction <= 1):
            raise ParameterOutOfRange("cfl_fraction must lie in (0, 1]")
        if self.monitor_stride < 1:
            raise ParameterOutOfRange("monitor_stride must be >= 1")


@dataclass(frozen=True)
class DiagnosticsConfig:
    a_max: float = 4.0          # half-width of the rescaling grid
    n_diag: int = 257
    compact_radius: float = 2.0  # |a| bound for C^k norms and invariance
    fit_t_min: float = 1.0


@dataclass(frozen=True)
class GaugeConfig:
    kind: str = "NegU0"
    harmonic_offset: float = 0.0


@dataclass
class Scenario:
    name: str
    family: str
    params: dict
    grid: GridSpec
    solver: SolverConfig
    gauge: GaugeConfig
    diagnostics: DiagnosticsConfig
    expected_existence: str
    expected_aperture: Optional[float]
    has_exact: bool

    def initial_u(self) -> ConformalField:
        fn = _FAMILIES[self.family]
        r = self.grid.radii()
        return ConformalField(ScalarField(self.grid, fn(r, self.params)))

    def exact_solution(self, x, t: float) -> float:
        """Pointwise exact u at Euclidean position x (scalar radius or a
        2-vector) and time t."""
        if not self.has_exact:
            raise NoExactSolution(self.name)
        r = float(np.hypot(*x)) if np.ndim(x) else float(abs(x))
        if self.family == "Flat":
            return self.params["c"]
        return -float(np.log(np.exp(4.0 * t) + r * r))

    def exact_u_field(self, t: float) -> np.ndarray:
        if not self.has_exact:
            raise NoExactSolution(self.name)
        r = self.grid.radii()
        if self.family == "Flat":
            return np.full_like(r, self.params["c"])
        return -np.log(np.exp(4.0 * t) + r * r)

    def initial_curvature_exact(self) -> np.ndarray:
        """Closed-form R(u0) on the grid nodes."""
        r = self.grid.radii()
        f = self.family
        p = self.params
        if f == "Flat":
            return np.zeros_like(r)
        if f == "GaussianBump":
            A, sig = p["A"], p["sigma"]
            u0 = A * np.exp(-(r**2) / sig**2)
            return 4 * A * (sig**2 - r**2) * np.exp(-u0 - r**2 / sig**2) / sig**4
        if f == "Cigar":
            return 4.0 / (1.0 + r**2)
        if f == "Cone":
            beta, eps = p["beta"], p["eps"]
            return 4 * eps**2 * (1 - beta) * (eps**2 + r**2) ** (-1 - beta)
        if f == "FiniteArea":
            q = p["p"]
            return 4 * q * (1 + r**2) ** (q - 2)
        raise UnknownScenario(f)


def _u_flat(r, p):
    return np.full_like(r, float(p["c"]))


def _u_bump(r, p):
    return p["A"] * np.exp(-(r**2) / p["sigma"] ** 2)


def _u_cigar(r, p):
    return -np.log(1.0 + r**2)


def _u_cone(r, p):
    return (p["beta"] - 1.0) * np.log(p["eps"] ** 2 + r**2)


def _u_finite_area(r, p):
    return -p["p"] * np.log(1.0 + r**2)


_FAMILIES: dict = {
    "Flat": _u_flat,
    "GaussianBump": _u_bump,
    "Cigar": _u_cigar,
    "Cone": _u_cone,
    "FiniteArea": _u_finite_area,
}

_DEFAULT_GRIDS = {
    "Flat": dict(kind=RADIAL, extent=16.0, n=129),
    "GaussianBump": dict(kind=RADIAL, extent=64.0, n=4096),
    "Cigar": dict(kind=RADIAL, extent=40.0, n=801),
    "Cone": dict(kind=RADIAL, extent=1e4, n=2048, stretched=True, rho_min=1e-3),
    "FiniteArea": dict(kind=RADIAL, extent=64.0, n=1025),
}


def build(name: str, **overrides) -> Scenario:
    """Build a named scenario: ``Flat``, ``GaussianBump``, ``Cigar``,
    ``Cone``, ``FiniteArea`` (family parameters as keyword overrides)."""
    family = name
    if family not in _FAMILIES:
        raise UnknownScenario(name)

    params: dict
    if family == "Flat":
        params = {"c": float(overrides.pop("c", 0.0))}
        expected = (GLOBAL, 1.0, True)
    elif family == "GaussianBump":
        params = {
            "A": float(overrides.pop("A", 1.0)),
            "sigma": float(overrides.pop("sigma", 2.0)),
        }
        if params["sigma"] <= 0:
            raise ParameterOutOfRange("sigma must be positive")
        expected = (GLOBAL, 1.0, False)
    elif family == "Cigar":
        params = {}
        expected = (GLOBAL, 0.0, True)
    elif family == "Cone":
        beta = float(overrides.pop("beta", 0.5))
        eps = float(overrides.pop("eps", 0.1))
        if not (0 < beta <= 1):
            raise ParameterOutOfRange("cone needs beta in (0, 1]")
        if eps <= 0:
            raise ParameterOutOfRange("cone smoothing eps must be positive")
        params = {"beta": beta, "eps": eps}
        expected = (GLOBAL, beta, False)
    else:  # FiniteArea
        pexp = float(overrides.pop("p", 2.0))
        if pexp <= 0:
            raise ParameterOutOfRange("FiniteArea needs p > 0")
        params = {"p": pexp}
        cls = FINITE_TIME if pexp > 1 else GLOBAL
        expected = (cls, max(0.0, 1.0 - pexp), False)

    gdef = dict(_DEFAULT_GRIDS[family])
    for key in ("kind", "extent", "n", "boundary", "stretched", "rho_min"):
        if key in overrides:
            gdef[key] = overrides.pop(key)
    grid = GridSpec(**gdef)

    # the Flat control needs t_end past the decay-fit window to report PASS
    default_t_end = 100.0 if family == "Flat" else 1.0
    solver = overrides.pop("solver", None) or SolverConfig(
        scheme=overrides.pop("scheme", IMPLICIT_NEWTON),
        t_end=float(overrides.pop("t_end", default_t_end)),
        cfl_fraction=float(overrides.pop("cfl_fraction", 0.5)),
        dt_max=float(overrides.pop("dt_max", np.inf)),
        monitor_stride=int(overrides.pop("monitor_stride", 1)),
    )
    gauge = overrides.pop("gauge", None) or GaugeConfig()
    diagnostics = overrides.pop("diagnostics", None) or DiagnosticsConfig()
    if overrides:
        raise ParameterOutOfRange(f"unknown scenario parameters {sorted(overrides)}")

    existence, ap, has_exact = expected
    return Scenario(
        name=name,
        family=family,
        params=params,
        grid=grid,
        solver=solver,
        gauge=gauge,
        diagnostics=diagnostics,
        expected_existence=existence,
        expected_aperture=ap,
        has_exact=has_exact,
    )


# ---------------------------------------------------------------------------
# config files: INI sections [initial] [grid] [solver] [gauge] [diagnostics]

_SECTION_KEYS = {
    "initial": {"family", "c", "A", "sigma", "beta", "eps", "p"},
    "grid": {"kind", "extent", "n", "boundary", "stretched", "rho_min"},
    "solver": {
        "scheme", "dt_max", "cfl_fraction", "newton_tol",
        "newton_max_iter", "t_end", "monitor_stride",
    },
    "gauge": {"kind", "harmonic_offset"},
    "diagnostics": {"a_max", "n_diag", "compact_radius", "fit_t_min"},
}


def parse_config(text: str) -> Scenario:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e))
    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(cp[section]) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    if "initial" not in cp or "family" not in cp["initial"]:
        raise ConfigError("missing [initial] family")

    ini = dict(cp["initial"])
    family = ini.pop("family")
    kwargs: dict = {k: float(v) for k, v in ini.items()}

    if "grid" in cp:
        gsec = cp["grid"]
        for k in gsec:
            if k == "kind":
                kwargs["kind"] = gsec[k]
            elif k == "boundary":
                kwargs["boundary"] = gsec[k]
            elif k == "n":
                kwargs["n"] = gsec.getint(k)
            elif k == "stretched":
                kwargs["stretched"] = gsec.getboolean(k)
            else:
                kwargs[k] = gsec.getfloat(k)
    if "solver" in cp:
        ssec = cp["solver"]
        kwargs["solver"] = SolverConfig(
            scheme=ssec.get("scheme", IMPLICIT_NEWTON),
            dt_max=ssec.getfloat("dt_max", np.inf),
            cfl_fraction=ssec.getfloat("cfl_fraction", 0.5),
            newton_tol=ssec.getfloat("newton_tol", 1e-10),
            newton_max_iter=ssec.getint("newton_max_iter", 30),
            t_end=ssec.getfloat("t_end", 1.0),
            monitor_stride=ssec.getint("monitor_stride", 1),
        )
    if "gauge" in cp:
        kwargs["gauge"] = GaugeConfig(
            kind=cp["gauge"].get("kind", "NegU0"),
            harmonic_offset=cp["gauge"].getfloat("harmonic_offset", 0.0),
        )
    if "diagnostics" in cp:
        dsec = cp["diagnostics"]
        kwargs["diagnostics"] = DiagnosticsConfig(
            a_max=dsec.getfloat("a_max", 4.0),
            n_diag=dsec.getint("n_diag", 257),
            compact_radius=dsec.getfloat("compact_radius", 2.0),
            fit_t_min=dsec.getfloat("fit_t_min", 1.0),
        )
    return build(family, **kwargs)


def load_config(path) -> Scenario:
    with open(path) as fh:
        return parse_config(fh.read())


def default_config_text(family: str = "GaussianBump") -> str:
    """A template config for the CLI."""
    sc = build(family)
    buf = io.StringIO()
    buf.write("[initial]\n")
    buf.write(f"family = {family}\n")
    for k, v in sc.params.items():
        buf.write(f"{k} = {v}\n")
    g = sc.grid
    buf.write(f"\n[grid]\nkind = {g.kind}\nextent = {g.extent}\nn = {g.n}\n")
    if g.stretched:
        buf.write(f"stretched = true\nrho_min = {g.rho_min}\n")
    s = sc.solver
    buf.write(
        f"\n[solver]\nscheme = {s.scheme}\nt_end = {s.t_end}\n"
        f"cfl_fraction = {s.cfl_fraction}\n"
    )
    buf.write("\n[gauge]\nkind = NegU0\nharmonic_offset = 0.0\n")
    d = sc.diagnostics
    buf.write(
        f"\n[diagnostics]\na_max = {d.a_max}\nn_diag = {d.n_diag}\n"
        f"compact_radius = {d.compact_radius}\nfit_t_min = {d.fit_t_min}\n"
    )
    return buf.getvalue()
