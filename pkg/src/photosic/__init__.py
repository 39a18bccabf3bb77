"""Photonics-assisted RF self-interference cancellation simulator."""

__version__ = "0.1.0"

from .errors import AliasingError, ConfigurationError, NoLockError, SicError, StageError  # noqa: E402
from .signals import SampledSignal, WaveformSpec, generate, read_sig, write_sig  # noqa: E402

__all__ = [
    "AliasingError", "ConfigurationError", "NoLockError", "SicError", "StageError",
    "SampledSignal", "WaveformSpec", "generate", "read_sig", "write_sig", "__version__",
]
