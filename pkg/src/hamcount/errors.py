"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage/domain problems exit 2,
resource-cap refusals exit 3, threshold failures exit 1.
"""


class DomainError(ValueError):
    """An argument is outside the documented domain of an operation."""


class FormatError(ValueError):
    """A text input (edge list, config) violates the documented format."""


class ResourceCapError(RuntimeError):
    """An exact kernel was asked to run beyond its configured size cap."""


class PreconditionError(ValueError):
    """A structural precondition of a pipeline operation does not hold.

    Carries ``witnesses``: the offending vertices/edges, for diagnostics.
    """

    def __init__(self, message, witnesses=None):
        super().__init__(message)
        self.witnesses = witnesses if witnesses is not None else []


class MergeFailureError(RuntimeError):
    """Loop merging found no admissible neighbour; reported, never ignored."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex
