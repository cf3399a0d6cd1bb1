"""Exception hierarchy shared across the package.

Every error carries a stable exit code so the CLI can map failures to
distinct process statuses (see the table in the README).
"""


class SwomtError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class MassMismatch(SwomtError):
    """Endpoint densities differ in total mass beyond tolerance."""

    exit_code = 5


class InvalidParams(SwomtError):
    """Solver parameters violate a required condition (e.g. step sizes)."""

    exit_code = 6


class PoissonNonConvergence(SwomtError):
    """The conjugate-gradient Poisson solve exceeded its iteration cap."""

    exit_code = 8


class GridTooSmall(SwomtError):
    """A kernel's support does not fit inside the requested grid."""

    exit_code = 12


class Infeasible(SwomtError):
    """No kernel satisfies the moment/nonnegativity/support constraints."""

    exit_code = 7


class NonSeparableExclusion(SwomtError):
    """Exclusion region does not factor into per-axis slabs."""

    exit_code = 13


class KernelSupportViolation(SwomtError):
    """Scaled kernel support exceeds the interaction radius."""

    exit_code = 11


class RejectionStall(SwomtError):
    """Rejection sampling acceptance rate collapsed (pathological density)."""

    exit_code = 10


class UnstableStep(SwomtError):
    """An agent moved further than 10 grid cells in one step (dt too large)."""

    exit_code = 9


class ParseError(SwomtError):
    """Configuration file is not valid JSON / not readable."""

    exit_code = 2


class SchemaError(SwomtError):
    """Configuration violates the strict schema (names key and location)."""

    exit_code = 3


class MissingArtifact(SwomtError):
    """A pipeline stage requires artifacts that are not on disk."""

    exit_code = 4
