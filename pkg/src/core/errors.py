"""
Exception hierarchy shared by the library and the command line front end.
"""


class AtlasError(Exception):
    """Base class for every error raised by convexity-atlas."""


class InvalidParamsError(AtlasError, ValueError):
    """Parameters, resolutions or ranges outside their admissible set."""


class OffSurfaceError(InvalidParamsError):
    """Initial data that does not lie on the level set {K = 0}."""


class SingularityError(AtlasError, ValueError):
    """Evaluation at (or too close to) a collision singularity."""


class RootFindingError(AtlasError, RuntimeError):
    """
    A bracketed root search failed.

    Attributes:
        bracket: The interval that was searched
        values: Function values at the bracket ends
    """

    def __init__(self, message, bracket=None, values=None):
        super().__init__(message)
        self.bracket = bracket
        self.values = values


class IntegrationError(AtlasError, RuntimeError):
    """
    Base class for failures of the flow integrator.

    Attributes:
        t: Time at which the failure was detected
        z: State at that time (may be None)
    """

    def __init__(self, message, t=None, z=None):
        super().__init__(message)
        self.t = t
        self.z = z


class DriftExceededError(IntegrationError):
    """|K| along the trajectory left the configured drift bound."""


class SingularApproachError(IntegrationError):
    """The trajectory came too close to the sun collision 2v^2 = 1."""


class StepUnderflowError(IntegrationError):
    """The adaptive step size fell below floating point resolution."""


class ReturnMapError(IntegrationError):
    """
    Integration failed while computing a return map iterate.

    Attributes:
        index: Number of iterates computed before the failure
    """

    def __init__(self, message, index, t=None, z=None):
        super().__init__(message, t=t, z=z)
        self.index = index


class OrbitSearchError(AtlasError, RuntimeError):
    """The symmetric shooting search could not produce a periodic orbit."""
