"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line frontend can map
failures onto its contract: 2 for bad input, 3 for numerical failure and
4 for a violated property.
"""

from __future__ import annotations


class SlKreinError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class InputError(SlKreinError):
    exit_code = 2


class NumericError(SlKreinError):
    exit_code = 3


class PropertyViolation(SlKreinError):
    exit_code = 4


# problem
class NonPositiveCoefficient(InputError):
    pass


class BadInterval(InputError):
    pass


class BadGrid(InputError):
    pass


class UnknownPreset(InputError):
    pass


class BadDocument(InputError):
    """Malformed JSON problem or boundary-condition document."""


# propagate
class IntegratorFailure(NumericError):
    pass


class DirichletEigenvalue(NumericError):
    pass


class GridMismatch(InputError):
    pass


class GramMismatch(PropertyViolation):
    pass


# boundary
class RankDeficient(InputError):
    pass


class NotLagrangian(InputError):
    pass


# bdm
class SpectralPoint(NumericError):
    pass


class SingularS(InputError):
    pass


class WrongCoefficients(InputError):
    pass


# spectra
class WindowEdgeEigenvalue(NumericError):
    pass


class CountMismatch(NumericError):
    """Root scan and argument-principle count disagree after refinement."""


class NotStrictlyPositive(NumericError):
    pass


class SpectrumOutOfReach(NumericError):
    """The spectrum extends so far below that solutions overflow double precision."""


# shift
class PathThroughSpectrum(NumericError):
    pass


class InsufficientEigs(NumericError):
    pass


class DegenerateN(InputError):
    pass


class NonIntegerValue(NumericError):
    pass


class OutOfInterval(InputError):
    """A point lies outside [a, b]."""
