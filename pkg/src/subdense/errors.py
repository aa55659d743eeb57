"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so the split between "the hypothesis
does not hold" and "the numbers went wrong" matters.
"""


class SubdenseError(Exception):
    """Base class for all package errors."""


class ModelSpecError(SubdenseError):
    """A model description could not be parsed or has a bad field."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ModelInvalidError(SubdenseError):
    """The Levy measure violates an integrability or monotonicity requirement."""


class NumericalIntegrityError(SubdenseError):
    """A computed quantity contradicts a structural property (sign, bracket, convergence)."""


class CapabilityError(SubdenseError):
    """A scaling or structural hypothesis needed by the requested operation fails."""


class SupportError(SubdenseError):
    """The point lies outside the open support interval of the density."""


class OutOfRangeError(SubdenseError):
    """The point lies beyond the range reachable by the saddle equation."""
