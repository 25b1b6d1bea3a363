"""Exception hierarchy.

Every failure mode of the toolkit raises a distinct subclass of
:class:`SilforgeError`, so callers (and the CLI) can separate analysis
failures from programming errors.
"""


class SilforgeError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------- construction

class NonRectangular(SilforgeError):
    """Raw map grid has rows of unequal length."""


class NegativeCount(SilforgeError):
    """Map contains a negative or non-finite count value."""


class NonPositivePixelSize(SilforgeError):
    """Pixel pitch must be strictly positive."""


class SpecInvalid(SilforgeError):
    """A domain object or simulation spec violates its invariants."""


# --------------------------------------------------------------------- fitting

class FitNotConverged(SilforgeError):
    """Nonlinear least squares failed to converge."""


class InsufficientData(SilforgeError):
    """Too few samples, or samples with too little spread, to fit."""


# ------------------------------------------------------------------- yield

class AllSitesOccupied(SilforgeError):
    """Zero empty sites: the occupancy MLE is unbounded."""


class EmptyCurve(SilforgeError):
    """Yield curve contains no points."""


class NegativeRadius(SilforgeError):
    """Radial sample below zero."""


# ------------------------------------------------------------------- photon

class MissingChannel(SilforgeError):
    """Correlation analysis needs events on both detector channels."""


class EmptyStream(SilforgeError):
    """Photon stream contains no events."""


class RhoOutOfRange(SilforgeError):
    """Signal fraction rho must satisfy 0 < rho <= 1."""


# -------------------------------------------------------------------- imaging

class CollinearPoints(SilforgeError):
    """Circle fit received (numerically) collinear points."""


class InsufficientPoints(SilforgeError):
    """Too few points for the requested geometric fit."""


class DegenerateConic(SilforgeError):
    """Conic fit is rank deficient or not an ellipse."""


class PeaksNotFound(SilforgeError):
    """Profile does not cross the ring twice at detectable amplitude."""


class NoPeak(SilforgeError):
    """ROI contains no local maximum above the noise floor."""


class NonPositiveFactor(SilforgeError):
    """Magnification factor must be strictly positive."""


# ------------------------------------------------------------------------- io

class MalformedHeader(SilforgeError):
    """File header missing, unparseable, or of unknown version."""


class DimensionMismatch(SilforgeError):
    """Data block does not match the dimensions announced in the header."""


class ChannelOutOfRange(SilforgeError):
    """Stream file contains a channel other than 0 or 1."""


class UnsortedStreamWarning(UserWarning):
    """Stream file timestamps were out of order and have been sorted."""
