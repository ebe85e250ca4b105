"""Exception types shared across the package."""


class DataError(ValueError):
    """Raised when input data are structurally invalid."""


class ModelError(RuntimeError):
    """Raised when a model cannot be fitted or queried (e.g. a win/loss
    network that is not strongly connected under maximum likelihood)."""
