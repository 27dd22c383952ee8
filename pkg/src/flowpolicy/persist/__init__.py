from .checkpoint import (
    CheckpointError,
    CrcError,
    TruncatedError,
    VersionError,
    load_checkpoint,
    save_checkpoint,
)
from .config import ConfigError, coerce, load_config, parse_config
from .logsetup import setup_logging

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
    "CrcError",
    "TruncatedError",
    "VersionError",
    "ConfigError",
    "parse_config",
    "load_config",
    "coerce",
    "setup_logging",
]
