"""Exception taxonomy shared by all modules.

Each class maps to one CLI exit code so shell callers can tell a malformed
file from bad data from a solver that gave up.
"""


class GridRouteError(Exception):
    """Base class for everything raised on purpose."""

    exit_code = 1


class SchemaError(GridRouteError):
    """A file failed to parse or contained unknown/missing fields."""

    exit_code = 2


class ValidationError(GridRouteError):
    """Parsed fine, but the data violates a model invariant."""

    exit_code = 3


class SolverError(GridRouteError):
    """The optimization backend could not produce a usable answer."""

    exit_code = 4


class SingularKktError(SolverError):
    """The KKT system went singular; distinct from plain infeasibility."""
