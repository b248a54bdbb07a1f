"""Exception hierarchy.

Every computational failure derives from :class:`OTFlatError`; the CLI maps
these to exit code 2 and prints the class name.
"""


class OTFlatError(Exception):
    """Base class for all library errors."""


class MassMismatch(OTFlatError, ValueError):
    pass


class EmptyMeasure(OTFlatError, ValueError):
    pass


class NegativeWeight(OTFlatError, ValueError):
    pass


class TooLarge(OTFlatError, ValueError):
    pass


class NotLipschitz(OTFlatError, ValueError):
    pass


class MeanNotZero(OTFlatError, ValueError):
    pass


class HTooLarge(OTFlatError, ValueError):
    pass


class Degenerate(OTFlatError, ValueError):
    pass


class NoIntersection(OTFlatError, ValueError):
    pass


class OutsideDomain(OTFlatError, ValueError):
    pass


class ZeroMass(OTFlatError, ValueError):
    pass


class EmptyBall(OTFlatError, ValueError):
    pass


class LipschitzViolated(OTFlatError, ValueError):
    pass


class TooDeep(OTFlatError, ValueError):
    pass


class ZeroSigmaMass(OTFlatError, ValueError):
    pass


class ComparabilityViolated(OTFlatError, ValueError):
    pass
