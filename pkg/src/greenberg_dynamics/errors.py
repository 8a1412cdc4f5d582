"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """A value lies outside the mathematical domain of an operation."""


class ArgumentError(ValueError):
    """A structural argument (count, range, grid) is invalid."""


class EscapeError(RuntimeError):
    """An orbit left the valid density interval before an estimate finished."""


class SpecError(ValueError):
    """A payload does not match the schema or plot kind it was given to."""


class RenderError(ValueError):
    """A plot spec carries axis ranges that cannot be drawn."""


class EscapeWarning(UserWarning):
    """An iterate left the valid density interval; the orbit was truncated."""
