"""Exception hierarchy shared by every brickmix module."""


class BrickmixError(Exception):
    """Base class for all library errors."""


class DimensionError(BrickmixError, ValueError):
    """Lengths or (n, k) shapes do not agree."""


class RangeError(BrickmixError, ValueError):
    """An index lies outside its valid range."""


class PlacementError(BrickmixError, ValueError):
    """A gate window is invalid for the wire count."""


class ArchitectureError(BrickmixError, ValueError):
    """An architecture descriptor is malformed."""


class ParameterError(BrickmixError, ValueError):
    """A numeric parameter violates its precondition."""


class StructureError(BrickmixError, ValueError):
    """A generator or operator lacks the required structure."""


class CapacityError(BrickmixError):
    """The state space exceeds the dense, exact, or matvec cap."""


class ModelError(BrickmixError):
    """An operator violates a modelling assumption, e.g. leaks mass out of the distinct set."""


class ConfigError(BrickmixError):
    """A run configuration is incomplete or inconsistent."""
