"""Hurricane evacuation behaviour from passively collected smartphone sightings."""
from ._accel import backend
from .errors import (EvacuscopeError, InsufficientData, InvalidConfig, MalformedRecord, MissingArtifact,
                     NoBaselineData, NotNested, OutOfRange, RankDeficient, EmptyDesign)

__version__ = "0.1.0"

__all__ = ["backend", "EvacuscopeError", "InsufficientData", "InvalidConfig", "MalformedRecord", "MissingArtifact",
           "NoBaselineData", "NotNested", "OutOfRange", "RankDeficient", "EmptyDesign", "__version__"]
