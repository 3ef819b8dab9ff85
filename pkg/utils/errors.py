"""Exception hierarchy shared by the simulation, estimation and CLI layers."""

from typing import Optional

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


class ElasticaError(Exception):
    """Base class for every error raised by this package."""

    exit_code: int = EXIT_NUMERICAL


class ConfigError(ElasticaError):
    """
    Invalid configuration.

    Args:
        message: Description of the problem
        key_path: Dotted path of the offending key, if known
        line: 1-based line in the config file, if known
    """

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, key_path: Optional[str] = None, line: Optional[int] = None):
        self.key_path = key_path
        self.line = line
        location = ""
        if key_path:
            location += f" at '{key_path}'"
        if line is not None:
            location += f" (line {line})"
        super().__init__(f"{message}{location}")


class PreconditionError(ElasticaError):
    """A hypothesis of the rate theorem or of a concentration bound does not hold."""

    exit_code = EXIT_CONFIG

    def __init__(self, violations: list):
        self.violations = list(violations)
        super().__init__("precondition violated: " + "; ".join(self.violations))


class StabilityError(ElasticaError):
    """Explicit Euler step too large for the stiffest mode."""

    def __init__(self, h_theta: float):
        self.h_theta = h_theta
        super().__init__(f"h*theta_1 = {h_theta:.4g} exceeds 0.5; reduce the step size")


class SingularGram(ElasticaError):
    """Gram matrix is numerically singular."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"Gram matrix is numerically singular (condition estimate {condition:.3g})")


class ZeroDenominator(ElasticaError):
    """A per-coordinate denominator vanished."""

    def __init__(self, coord: int):
        self.coord = coord
        super().__init__(f"per-coordinate denominator is zero for coordinate {coord}")


class MissingNoise(ElasticaError):
    """The bundle was simulated without storing its noise increments."""

    def __init__(self) -> None:
        super().__init__("bundle carries no noise increments; simulate with store_noise=True")


class DomainError(ElasticaError):
    """Argument outside the domain of a closed-form expression."""


class DegenerateGrid(ElasticaError):
    """Not enough spread in the regression abscissae."""


class CapacityError(ElasticaError):
    """Requested object exceeds the size cap."""

    exit_code = EXIT_CONFIG


class EigenSolverError(ElasticaError):
    """Jacobi sweeps did not converge."""


class VerificationFailure(ElasticaError):
    """A statistical check exceeded its allowed slack."""

    exit_code = EXIT_VERIFICATION
