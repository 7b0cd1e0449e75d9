"""Grids, scalar fields, and the plain-text snapshot format.

Two grid kinds are supported:

* ``Radial1D``: nodes rho_i on [0, L].  Uniform grids have spacing
  h = L/(n-1) and include rho = 0.  Log-stretched grids (aperture studies
  only) place node 0 at rho = 0 and the remaining n-1 nodes geometrically
  between ``rho_min`` and L; differential operators reject them.
* ``Cartesian2D``: n x n nodes on [-L, L]^2, n odd so the origin is a node,
  spacing h = 2L/(n-1).  Field values are stored row-major (y varies
  slowest), one flat array per field.

Boundary models:

* ``DirichletInitial``: evolved fields keep their t=0 boundary values;
  operators use one-sided second-order stencils at the boundary.
* ``Neumann0``: zero normal derivative via mirror ghost nodes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterOutOfRange

RADIAL = "Radial1D"
CARTESIAN = "Cartesian2D"
DIRICHLET_INITIAL = "DirichletInitial"
NEUMANN0 = "Neumann0"


@dataclass(frozen=True)
class GridSpec:
    kind: str
    extent: float
    n: int
    boundary: str = DIRICHLET_INITIAL
    stretched: bool = False
    rho_min: float = 1e-3

    def __post_init__(self):
        if self.kind not in (RADIAL, CARTESIAN):
            raise ParameterOutOfRange(f"unknown grid kind {self.kind!r}")
        if self.boundary not in (DIRICHLET_INITIAL, NEUMANN0):
            raise ParameterOutOfRange(f"unknown boundary model {self.boundary!r}")
        if self.n < 16:
            raise ParameterOutOfRange(f"n={self.n} < 16")
        if self.extent <= 0:
            raise ParameterOutOfRange("extent must be positive")
        if self.kind == CARTESIAN:
            if self.n % 2 == 0:
                raise ParameterOutOfRange("Cartesian grids need odd n (origin on a node)")
            if self.stretched:
                raise ParameterOutOfRange("stretched grids are radial only")
        if self.stretched and not (0 < self.rho_min < self.extent):
            raise ParameterOutOfRange("need 0 < rho_min < extent for stretched grids")

    @property
    def h(self) -> float:
        """Uniform spacing; undefined for stretched grids."""
        if self.stretched:
            raise ParameterOutOfRange("stretched grid has no uniform spacing")
        if self.kind == RADIAL:
            return self.extent / (self.n - 1)
        return 2.0 * self.extent / (self.n - 1)

    @property
    def node_count(self) -> int:
        return self.n if self.kind == RADIAL else self.n * self.n

    def axis(self) -> np.ndarray:
        """1D node coordinates: rho for radial grids, x (= y) for Cartesian."""
        if self.kind == RADIAL:
            if self.stretched:
                return np.concatenate(
                    [[0.0], np.geomspace(self.rho_min, self.extent, self.n - 1)]
                )
            return np.linspace(0.0, self.extent, self.n)
        return np.linspace(-self.extent, self.extent, self.n)

    def meshgrid(self):
        """(X, Y) node coordinate arrays for a Cartesian grid."""
        ax = self.axis()
        return np.meshgrid(ax, ax, indexing="xy")

    def radii(self) -> np.ndarray:
        """Euclidean distance of every node from the origin, flat layout."""
        if self.kind == RADIAL:
            return self.axis()
        X, Y = self.meshgrid()
        return np.hypot(X, Y).ravel()


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 2 and self.grid.kind == CARTESIAN:
            self.values = self.values.ravel()
        if self.values.shape != (self.grid.node_count,):
            raise ParameterOutOfRange(
                f"field has {self.values.shape} values for {self.grid.node_count} nodes"
            )

    def as_grid(self) -> np.ndarray:
        """Values shaped for stencil work: (n,) radial or (n, n) Cartesian."""
        if self.grid.kind == RADIAL:
            return self.values
        return self.values.reshape(self.grid.n, self.grid.n)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def assert_finite(self, what: str = "field"):
        if not np.isfinite(self.values).all():
            raise ParameterOutOfRange(f"{what} contains non-finite values")


def constant_field(grid: GridSpec, c: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.node_count, float(c)))


@dataclass
class ConformalField:
    """Conformal exponent u of the metric e^u g_E."""

    u: ScalarField

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def from_v(cls, grid: GridSpec, v: np.ndarray) -> "ConformalField":
        """Reconstruct from the conformal factor v = e^u, which must be > 0."""
        v = np.asarray(v, dtype=float)
        if not (v > 0).all():
            raise ParameterOutOfRange("conformal factor must be strictly positive")
        return cls(ScalarField(grid, np.log(v)))

    def conformal_factor(self) -> np.ndarray:
        return np.exp(self.u.values)


# ---------------------------------------------------------------------------
# snapshot files: header line + one value per line, 17 significant digits

def write_snapshot(path, field: ScalarField, t: float, name: str):
    g = field.grid
    lines = [f"# grid={g.kind} n={g.n} L={g.extent:.17g} t={t:.17g} field={name}"]
    lines.extend(f"{v:.17g}" for v in field.values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path):
    """Returns (field, t, name). The grid is rebuilt from the header with
    default boundary model; stretched grids round-trip node values but not
    the stretching metadata."""
    with open(path) as fh:
        header = fh.readline().strip()
        values = np.array([float(x) for x in fh.read().split()])
    if not header.startswith("# "):
        raise ParameterOutOfRange(f"bad snapshot header in {path}")
    meta = dict(item.split("=", 1) for item in header[2:].split())
    grid = GridSpec(kind=meta["grid"], extent=float(meta["L"]), n=int(meta["n"]))
    return ScalarField(grid, values), float(meta["t"]), meta["field"]
