"""Exception types raised across the pipeline."""


class SicError(Exception):
    """Base class for all errors raised by photosic."""


class ConfigurationError(SicError, ValueError):
    """A parameter or config value violates a documented bound."""


class AliasingError(SicError, ValueError):
    """Resampling would discard or fold signal content above the new Nyquist."""


class NoLockError(SicError, RuntimeError):
    """The cross-correlation peak is not significant enough to trust."""


class StageError(SicError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
