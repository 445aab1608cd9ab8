"""Exception types shared across the package.

Everything operational raises a subclass of BayocrError so callers (and the
CLI) can distinguish bad inputs from genuine bugs.
"""

from __future__ import annotations


class BayocrError(Exception):
    """Base class for errors raised on bad inputs, configs, or backends."""


class InputError(BayocrError, ValueError):
    """An array, raster, or argument does not satisfy a documented precondition."""


class ConfigError(BayocrError, ValueError):
    """A pipeline or tool configuration is internally inconsistent."""


class LabelParseError(BayocrError, ValueError):
    """A label file line could not be parsed. Message carries the line number."""


class DatasetError(BayocrError, ValueError):
    """A dataset directory or index violates the expected layout."""


class SidecarError(BayocrError, ValueError):
    """A detection sidecar document is malformed. Message names the bad field."""


class BackendError(BayocrError, RuntimeError):
    """An external detector process misbehaved (exit status, protocol, output)."""


class AmbiguityError(BayocrError, ValueError):
    """Ambiguity expansion would exceed the configured candidate cap."""
