"""Exception types shared across the package."""


class FactorbenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FactorbenchError):
    """A table, study or run configuration is structurally invalid."""


class OutOfClassError(FactorbenchError):
    """A realization component lies outside every class region of its factor."""


class IdxParseError(FactorbenchError):
    """An IDX file is malformed; carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class AssetError(FactorbenchError):
    """A shape or texture asset is missing or unusable."""


class CropError(FactorbenchError):
    """A requested texture crop does not fit inside the texture."""


class PlacementError(FactorbenchError):
    """Rendered object cannot be placed fully inside the image frame."""


class StudyDefinitionError(FactorbenchError):
    """A study's cell pattern or split request is unsatisfiable."""


class PredictionValidationError(FactorbenchError):
    """A prediction file violates the manifest contract; lists offenders."""

    def __init__(self, message, offenders=()):
        offenders = list(offenders)
        if offenders:
            shown = ", ".join(str(o) for o in offenders[:10])
            more = "" if len(offenders) <= 10 else f" (+{len(offenders) - 10} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)
        self.offenders = offenders


class TrainingError(FactorbenchError):
    """Probe training diverged; carries the last numerically stable epoch."""

    def __init__(self, message, last_stable_epoch=None):
        super().__init__(message)
        self.last_stable_epoch = last_stable_epoch
