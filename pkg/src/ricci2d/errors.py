"""Error types shared across the package.

Every recoverable failure carries a short machine-readable code (the same
strings the CLI prints) next to the human-readable message.
"""


class SimulationError(Exception):
    """Base error with a stable string code."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class RegionOutOfGrid(SimulationError):
    def __init__(self, message=""):
        super().__init__("region-out-of-grid", message)


class DomainTooSmall(SimulationError):
    def __init__(self, message=""):
        super().__init__("domain-too-small", message)


class PositivityLost(SimulationError):
    """Explicit step produced a non-positive conformal factor.

    Signals extinction or instability; carries the time at which it happened.
    """

    def __init__(self, t: float, message=""):
        self.t = t
        super().__init__("positivity-lost", f"t={t:.6g} {message}".strip())


class NewtonDiverged(SimulationError):
    def __init__(self, message=""):
        super().__init__("newton-diverged", message)


class PullbackOutOfDomain(SimulationError):
    def __init__(self, max_admissible: float, message=""):
        self.max_admissible = max_admissible
        super().__init__(
            "pullback-out-of-domain",
            f"max admissible half-width {max_admissible:.6g} {message}".strip(),
        )


class WindowTooShort(SimulationError):
    def __init__(self, message=""):
        super().__init__("window-too-short", message)


class NoExactSolution(SimulationError):
    def __init__(self, message=""):
        super().__init__("no-exact-solution", message)


class UnknownScenario(SimulationError):
    def __init__(self, message=""):
        super().__init__("unknown-scenario", message)


class ParameterOutOfRange(SimulationError):
    def __init__(self, message=""):
        super().__init__("parameter-out-of-range", message)


class PoissonNotConverged(SimulationError):
    def __init__(self, message=""):
        super().__init__("poisson-not-converged", message)


class ConfigError(SimulationError):
    def __init__(self, message=""):
        super().__init__("config-error", message)
