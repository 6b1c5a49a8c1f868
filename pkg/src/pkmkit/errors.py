"""Exception hierarchy and warning categories shared across the toolkit.

Exit codes on the exception classes are the CLI contract: 2 for
configuration problems, 3 for unreachable poses / joint limits, 4 for
singular configurations, 5 for assembly failures.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class GeometryConfigError(ToolkitError):
    """Malformed geometry, bad parameters, or dimensionally inconsistent inputs."""

    exit_code = 2


class AssemblyConsistencyError(ToolkitError):
    """A (pose, joints) pair handed to a Jacobian builder does not close the loops."""

    exit_code = 2


class UnreachablePoseError(ToolkitError):
    """A leg cannot reach the requested pose (negative discriminant)."""

    exit_code = 3

    def __init__(self, message, leg=None):
        super().__init__(message)
        self.leg = leg


class JointLimitError(UnreachablePoseError):
    """The closed-form joint solution falls outside the actuated joint limits."""


class SingularConfigurationError(ToolkitError):
    """Parallel-singular configuration: the platform is uncontrollable here."""

    exit_code = 4


class EmptyWorkspaceError(ToolkitError):
    """No grid cell satisfies the requested amplification bounds."""

    exit_code = 3


class NoAssemblyError(ToolkitError):
    """The given joint values admit no assembly (loops cannot close)."""

    exit_code = 5
    reason = "no-root"


class NewtonConvergenceError(NoAssemblyError):
    """The orientation solver failed to converge from every seed."""

    reason = "newton-divergence"


class SerialSingularityWarning(UserWarning):
    """A leg is at (or within tolerance of) a workspace-boundary singularity."""


class GeometryConfigWarning(UserWarning):
    """Geometry is usable but violates a soft layout convention."""
