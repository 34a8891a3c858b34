"""Exception hierarchy shared across the package."""


class PursuitArenaError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(PursuitArenaError, ValueError):
    """A scenario document does not match the schema.

    ``key`` holds the dotted path of the offending entry.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ValidationError(PursuitArenaError, ValueError):
    """A scenario parsed fine but breaks a semantic rule."""

    def __init__(self, rule, message):
        self.rule = rule
        super().__init__(f"[{rule}] {message}")


class DegenerateMapError(PursuitArenaError):
    pass


class MissingTargetError(PursuitArenaError, ValueError):
    pass


class NumericInputError(PursuitArenaError, ValueError):
    pass


class ShapeError(PursuitArenaError, ValueError):
    pass


class PreconditionError(PursuitArenaError, RuntimeError):
    pass


class DivergenceError(PursuitArenaError, FloatingPointError):
    """Training produced a non-finite loss or objective."""

    def __init__(self, message, step=None, robot=None):
        self.step = step
        self.robot = robot
        super().__init__(message)


class CheckpointError(PursuitArenaError):
    pass


class MissingCheckpointError(CheckpointError, FileNotFoundError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class RosterMismatchError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    """Stored network shapes do not fit the scenario's observation/action sizes."""
