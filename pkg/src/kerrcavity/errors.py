"""Exception types shared across the package."""


class KerrCavityError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(KerrCavityError):
    """Invalid configuration input; carries a dotted path to the offending field."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class LambdaZeroError(KerrCavityError):
    """Closed-form propagation requested with vanishing coupling strength.

    The closed form divides by the coupling; zero-coupling points are served
    by the integration path instead.
    """


class DegenerateRootsError(KerrCavityError):
    """Characteristic cubic has numerically repeated roots.

    The branch-weight formula divides by root gaps, and no confluent limit is
    provided, so evaluation is refused rather than guessed.
    """

    def __init__(self, message, cells=None):
        super().__init__(message)
        self.cells = list(cells) if cells is not None else []


class ComplexRootsError(KerrCavityError):
    """Trigonometric root formula left its real-root domain.

    Signals coefficients outside the physical regime (the physical generator
    is similar to a Hermitian matrix and always has three real roots).
    """


class StepTooLargeError(KerrCavityError):
    """Fixed-step integration drifted in norm beyond the allowed tolerance."""


class TruncationLeakError(KerrCavityError):
    """Population reached the guard band of the truncated Fock space."""


class ZeroMeanPhotonNumberError(KerrCavityError):
    """Photon-statistics quantity undefined for zero mean photon number."""


class ExponentCapError(KerrCavityError):
    """Requested moment exponent exceeds the configured cap."""
