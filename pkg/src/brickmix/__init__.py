"""Random reversible circuits and the random walks they induce on k-tuples of bit strings."""

__version__ = "0.1.0"

from .errors import (ArchitectureError, BrickmixError, CapacityError, ConfigError, DimensionError,
                     ModelError, ParameterError, PlacementError, RangeError, StructureError)

__all__ = ["__version__", "ArchitectureError", "BrickmixError", "CapacityError", "ConfigError",
           "DimensionError", "ModelError", "ParameterError", "PlacementError", "RangeError",
           "StructureError"]
