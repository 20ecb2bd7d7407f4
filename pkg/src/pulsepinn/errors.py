"""Exception types raised across the package."""


class PulsePinnError(Exception):
    """Base class for every error raised by pulsepinn."""


class NonFiniteValue(PulsePinnError, FloatingPointError):
    """A differentiable primitive produced NaN or Inf."""


class ShapeMismatch(PulsePinnError, ValueError):
    pass


class NotHermitian(PulsePinnError, ValueError):
    pass


class InvalidDensityMatrix(PulsePinnError, ValueError):
    pass


class NegativeRate(PulsePinnError, ValueError):
    pass


class UnknownGate(PulsePinnError, KeyError):
    pass


class DegenerateState(PulsePinnError, ArithmeticError):
    """The un-normalized ansatz vector collapsed to (numerically) zero norm."""


class NonPhysicalFidelity(PulsePinnError, ValueError):
    pass


class NonFiniteGradient(PulsePinnError, FloatingPointError):
    pass


class TooFewSamples(PulsePinnError, ValueError):
    pass


class MissingArtifact(PulsePinnError, FileNotFoundError):
    pass


class ConfigError(PulsePinnError, ValueError):
    """Invalid run or sweep configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
