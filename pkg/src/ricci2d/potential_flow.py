"""Potential formulation of the flow and its equivalence defect.

Writing the evolving conformal factor as e^u = e^{u0} + lap(psi) turns the
flow into a scalar evolution for the potential psi,

    d psi / dt = (u - u0) - f0,     psi(0) = 0,

and the defect S = e^u - e^{u0} - lap(psi) satisfies dS/dt = lap(u0 + f0) in
the continuum.  With the default gauge (f0 = -u0 + const) the right side
vanishes identically, so S measures pure discretisation drift between the
metric flow and its potential formulation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterOutOfRange
from .grid import ConformalField, ScalarField
from .operators import laplacian
from .potential import _interior

COMPATIBILITY_TOL = 1e-6


@dataclass
class PotentialFlowState:
    psi: ScalarField
    u0_ref: ConformalField
    f0_ref: ScalarField

    @classmethod
    def create(cls, u0: ConformalField, f0: ScalarField) -> "PotentialFlowState":
        """psi(0) = 0 (any harmonic psi0 gives the same metric; zero makes
        the defect vanish at t = 0 exactly).  Requires lap(u0 + f0) = 0."""
        s = ScalarField(u0.grid, u0.u.values + f0.values)
        resid = float(np.abs(laplacian(s).values[_interior(u0.grid)]).max())
        if resid >= COMPATIBILITY_TOL:
            raise ParameterOutOfRange(
                f"gauge incompatible with the potential formulation: "
                f"|lap(u0+f0)| = {resid:.3e}"
            )
        zero = ScalarField(u0.grid, np.zeros(u0.grid.node_count))
        return cls(psi=zero, u0_ref=u0, f0_ref=f0)

    def step(self, u_old: np.ndarray, u_new: np.ndarray, dt: float):
        """Trapezoid update of psi over one flow step."""
        source = 0.5 * (u_old + u_new) - self.u0_ref.u.values - self.f0_ref.values
        self.psi.values = self.psi.values + dt * source


def equivalence_defect(p: PotentialFlowState, m: ConformalField) -> float:
    """sup over interior nodes of |e^u - e^{u0} - lap(psi)|."""
    lap_psi = laplacian(p.psi)
    s = np.exp(m.u.values) - np.exp(p.u0_ref.u.values) - lap_psi.values
    return float(np.abs(s[_interior(m.grid)]).max())


def reconstruct_u(p: PotentialFlowState) -> ScalarField:
    """u recovered from the potential: log(e^{u0} + lap psi)."""
    v = np.exp(p.u0_ref.u.values) + laplacian(p.psi).values
    if (v <= 0).any():
        raise ParameterOutOfRange("potential reconstruction lost positivity")
    return ScalarField(p.psi.grid, np.log(v))
