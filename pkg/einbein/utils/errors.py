"""
Exception hierarchy for the einbein solver.

Every numerical or configuration failure raised by the library derives from
EinbeinError. The CLI maps ConfigurationError to exit code 2 and NumericalError
to exit code 3.
"""


class EinbeinError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(EinbeinError):
    """Invalid model, source or run configuration."""


class NumericalError(EinbeinError):
    """A numerical procedure failed or could not certify its result."""


# actions and prefactors
class UnsupportedCombination(ConfigurationError):
    pass


class DimensionMismatch(ConfigurationError):
    pass


class PoleEvaluation(NumericalError):
    pass


class BranchPointEvaluation(NumericalError):
    pass


# series expansions
class NonPolynomialModel(ConfigurationError):
    pass


class OrderOverflow(ConfigurationError):
    pass


class InvalidPoleIndex(ConfigurationError):
    pass


# rational fits
class IllConditioned(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class MultipleRoot(NumericalError):
    pass


# critical points and caustics
class RegionContainsPole(ConfigurationError):
    pass


class NonConvergence(NumericalError):
    pass


class NonPositiveParameters(ConfigurationError):
    pass


# contours
class ZeroResidue(NumericalError):
    pass


class FlowStall(NumericalError):
    pass


class WrongSector(NumericalError):
    pass


class NonIntegerCoefficients(NumericalError):
    pass


# integration
class AccuracyNotReached(NumericalError):
    pass


# asymptotic forms
class TooCloseToCaustic(NumericalError):
    pass


class DegenerateCubic(NumericalError):
    pass


class Overflow(NumericalError):
    pass


class UnclassifiedCaustic(NumericalError):
    pass


# loops and monodromy
class BasisNotClosed(NumericalError):
    pass


class CoarseLoop(NumericalError):
    pass


class IntegerRoundingFailure(NumericalError):
    pass
