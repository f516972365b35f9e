"""Camera-aided beam selection, end to end on one desk.

Simulates a street world with roadside basestations and a camera drone,
derives optimal beamforming labels from a ray-based channel model, renders
the matching frames, trains a from-scratch CNN on the pairs, prunes it, and
measures the result.
"""

from . import (backend, config, dataset, evaluation, nn, pruning, render,
               scene, wireless)
from .errors import (BeamvistaError, ConfigError, CorruptionError, DataError,
                     FormatError, GeometryError, NumericError, VisibilityError)

__version__ = "0.1.0"

__all__ = [
    "BeamvistaError", "ConfigError", "CorruptionError", "DataError",
    "FormatError", "GeometryError", "NumericError", "VisibilityError",
    "backend", "config", "dataset", "evaluation", "nn", "pruning", "render",
    "scene", "wireless", "__version__",
]
