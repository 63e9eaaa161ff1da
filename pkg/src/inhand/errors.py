"""Exception hierarchy shared by every stage of the pipeline."""


class InHandError(Exception):
    """Base class for all library errors."""


class InvalidArgument(InHandError, ValueError):
    pass


class SceneGenerationError(InHandError):
    pass


class InsufficientPoints(InHandError):
    pass


class AmbiguousAxis(InHandError):
    pass


class NoCandidate(InHandError):
    pass


class InvalidROI(InHandError, ValueError):
    pass


class GraspFailure(InHandError):
    pass


class CalibrationRequired(InHandError):
    pass


class GrooveEjection(InHandError):
    """The screw rotated past the groove limit and was lost."""


class SensorFault(InHandError):
    """The Hall switch never triggered during a full revolution."""


class InvalidCommand(InHandError, ValueError):
    pass


class ReorientationFailure(InHandError):
    pass
