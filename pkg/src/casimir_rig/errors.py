"""Exception types shared across the package."""


class CasimirRigError(Exception):
    """Base class for package errors."""


class DomainError(CasimirRigError):
    """Input outside the mathematical domain of an operation."""


class ContactError(CasimirRigError):
    """Synthesized gap reached zero; the virtual surfaces touched."""


class SnapInError(CasimirRigError):
    """Electrostatic pull-in: the bent-cantilever force balance has no solution."""


class FitError(CasimirRigError):
    """A least-squares fit failed to converge or produced an invalid result."""


class FitDegenerateError(FitError):
    """The data carry no information about the fitted parameter."""


class ConvergenceError(CasimirRigError):
    """A quadrature or series did not meet its tolerance."""


class LoopSignError(CasimirRigError):
    """Feedback loop diverged; the configured loop sign or gain is wrong."""


class SettlingError(CasimirRigError):
    """Demodulation record too short for the configured filter to settle."""


class ConfigError(CasimirRigError):
    """Malformed configuration, material or stack file."""
