"""Exception hierarchy shared across the library."""


class OntofitError(Exception):
    """Base class for all library errors."""


class ParamBoundsError(OntofitError):
    """A parameter value lies outside its schema bounds."""


class UnknownTemplateError(OntofitError, KeyError):
    """Template id not present in the registry."""


class UnknownAffordanceError(OntofitError, KeyError):
    """Affordance id not present on the template."""


class ParseError(OntofitError):
    """Malformed serialized instance / manifest / config text.

    Carries human-readable field or line context in the message.
    """


class DegeneratePointError(OntofitError):
    """Query point lies on a singular locus (e.g. a revolute axis)."""


class DegenerateInputError(OntofitError):
    """Input cloud is rank-deficient (collinear / too few points)."""


class GeometryError(OntofitError):
    """Geometric precondition violated (e.g. camera inside the object)."""


class NoMotionError(OntofitError):
    """Observed displacement below both the rotation and translation thresholds."""


class NoAffordanceError(OntofitError):
    """No feasible interaction site on the discovered instance."""


class PlanningError(OntofitError):
    """Interaction plan cannot be constructed (degenerate grasp placement)."""


class OptimizationFailure(OntofitError):
    """Every optimizer start diverged to a non-finite objective."""

    def __init__(self, message, traces=None):
        super().__init__(message)
        self.traces = traces if traces is not None else []


class EvaluationError(OntofitError):
    """A numeric check could not be evaluated (non-finite objective value)."""
