"""Exception types raised across the pipeline."""


class EvacuscopeError(Exception):
    """Base class for pipeline errors."""


class RecordError(EvacuscopeError, ValueError):
    reason = "malformed"


class MalformedRecord(RecordError):
    reason = "malformed"


class OutOfRange(RecordError):
    reason = "out_of_range"


class InsufficientData(EvacuscopeError):
    """Too few night sightings, or every night sighting is DBSCAN noise."""


class NoBaselineData(EvacuscopeError):
    """No baseline-month day qualifies for a mobility average."""


class EmptyDesign(EvacuscopeError):
    """No complete rows remain for the choice model."""


class RankDeficient(EvacuscopeError):
    def __init__(self, column: str):
        super().__init__(f"design matrix is rank deficient at column {column!r}")
        self.column = column


class NotNested(EvacuscopeError):
    """Models compared by likelihood ratio were fitted on different rows."""


class InvalidConfig(EvacuscopeError, ValueError):
    pass


class MissingArtifact(EvacuscopeError):
    def __init__(self, stage: str, path):
        super().__init__(f"missing {path}; run the '{stage}' stage first")
        self.stage = stage
        self.path = path
