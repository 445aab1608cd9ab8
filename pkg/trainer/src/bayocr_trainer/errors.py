"""Exception hierarchy; every expected failure derives from TrainerError."""


class TrainerError(Exception):
    """Base class for all expected trainer failures."""


class ConfigError(TrainerError):
    """Bad training configuration or class-weight file."""


class DataError(TrainerError):
    """Dataset layout, label file, or image decode problem."""


class ModelError(TrainerError):
    """Model artifact cannot be loaded or does not match the request."""
