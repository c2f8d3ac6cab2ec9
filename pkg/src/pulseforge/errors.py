"""Exception and warning types."""


class PulseforgeError(Exception):
    pass


class SingularityError(PulseforgeError):
    """The auxiliary equations hit ``sin(gamma) = 0`` with transverse drive."""


class ThetaMismatchError(PulseforgeError):
    pass


class CalibrationError(PulseforgeError):
    pass


class DivergentVarianceError(PulseforgeError):
    pass


class InstabilityError(PulseforgeError):
    pass


class SynthesisError(PulseforgeError):
    """A noise spectrum cannot be sampled as a time trace."""


class ConstraintError(PulseforgeError):
    pass


class UnknownPulseError(PulseforgeError, KeyError):
    pass


class DegeneratePhaseWarning(UserWarning):
    """Drive phase undefined at some samples; previous value carried forward."""


class MagnusWarning(UserWarning):
    """Noise too strong for the first-order filter-function estimate."""


class ParseError(PulseforgeError, ValueError):
    """Input file could not be read; the message names the line and column."""
