"""Exception types shared across the package."""


class CurriculaError(Exception):
    """Base class for all package errors."""


class ParseError(CurriculaError):
    """Malformed scene or config document."""


class ValidationError(CurriculaError):
    """A scene violates a structural invariant.

    Carries the full report so callers can see every offending object id.
    """

    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(report.issues()) or "invalid scene")


class UnknownObject(CurriculaError):
    pass


class NotMovable(CurriculaError):
    pass


class StartPoseInvalid(CurriculaError):
    pass


class OutOfBounds(CurriculaError):
    pass


class NoPath(CurriculaError):
    pass


class StartOccupied(CurriculaError):
    pass


class GoalOccupied(CurriculaError):
    pass


class InvalidTask(CurriculaError):
    pass


class TrajectorySceneMismatch(CurriculaError):
    pass


class NoMovableObjects(CurriculaError):
    pass


class SchemaViolation(CurriculaError):
    """A proposed move instruction does not satisfy the tool schema."""


class BackendUnavailable(CurriculaError):
    """The chat-completion endpoint could not be reached after retries."""


class AuthError(CurriculaError):
    pass
