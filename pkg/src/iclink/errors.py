"""Exception hierarchy.

Two families: :class:`ValidationError` for bad inputs and configuration
(CLI exit code 1) and :class:`SimulationError` for failures while computing
(CLI exit code 2).
"""


class IclError(Exception):
    """Base class for all package errors."""


class ValidationError(IclError, ValueError):
    pass


class SimulationError(IclError, RuntimeError):
    pass


# codec
class InvalidPair(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


# magnetics
class GeometryError(ValidationError):
    pass


class SingularityError(SimulationError):
    pass


class ModelError(SimulationError):
    pass


# netlist
class ParseError(ValidationError):
    pass


class OrderError(ParseError):
    pass


class PassivityError(SimulationError):
    pass


# sim
class ConfigError(ValidationError):
    pass


class SolverError(SimulationError):
    pass


class WindowError(SimulationError):
    pass


# metrics
class ShapeError(ValidationError):
    pass


class DegenerateError(SimulationError):
    pass


# harness
class SchemaError(ValidationError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class PathError(ValidationError):
    pass
