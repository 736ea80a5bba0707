"""Semantic exception hierarchy.

Every error raised by this package derives from :class:`TreeCascadeError`,
so callers (and the CLI exit-code registry) can dispatch on error class
rather than on message text.
"""


class TreeCascadeError(Exception):
    """Base class for all package errors."""


class ValidationError(TreeCascadeError):
    """Inputs violate a constructor or config contract."""


class ParseError(TreeCascadeError):
    """A config document is not well-formed."""


class DomainError(TreeCascadeError):
    """A fractional-moment evaluation was requested outside its finite domain."""


class NonPositiveMatrix(TreeCascadeError):
    """A matrix handed to the Perron solver has a non-positive entry."""


class NoConvergence(TreeCascadeError):
    """An iterative solver exhausted its iteration budget."""


class BracketingFailure(TreeCascadeError):
    """A scalar search could not bracket a minimum or a sign change."""


class AssumptionViolation(TreeCascadeError):
    """A requested quantity is undefined for this model's regime."""


class NotLattice(TreeCascadeError):
    """The exact lattice recursion needs all log-atoms on one arithmetic grid."""


class InsufficientHits(TreeCascadeError):
    """Too few rare-event hits for a trustworthy empirical rate."""


class MemoryBudgetExceeded(TreeCascadeError):
    """A simulation would exceed the configured particle/node budget."""


class UnsupportedLaw(TreeCascadeError):
    """A law family outside the shipped set was requested."""
