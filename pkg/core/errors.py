"""
core.errors
~~~~~~~~~~~
Exception hierarchy shared by the library and the command-line front-end.

Each error also derives from the builtin a caller would naturally catch
(ValueError, RuntimeError, FileNotFoundError), and carries the exit code
the CLI reports for it:

    2  configuration / input error
    3  training or attack failure
    4  missing artifact
    5  other I/O error (plain OSError, mapped in cli.app)
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for every error raised on purpose by this package."""
    exit_code: int = 1


class ConfigError(ToolkitError, ValueError):
    """A config value is missing, out of range or inconsistent."""
    exit_code = 2


class InputError(ToolkitError, ValueError):
    """Arrays, labels or datasets handed to an operation are unusable."""
    exit_code = 2


class DatasetError(InputError):
    """The on-disk dataset layout is broken."""


class AttackError(ToolkitError, RuntimeError):
    """PGD hit a non-finite gradient."""
    exit_code = 3


class TrainingError(ToolkitError, RuntimeError):
    """Training diverged (non-finite loss) or a fold task failed."""
    exit_code = 3


class ArtifactError(ToolkitError, FileNotFoundError):
    """A checkpoint, manifest or run directory is missing or unreadable."""
    exit_code = 4
