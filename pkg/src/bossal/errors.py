"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented contract (bad value, shape, or config)."""


class FormatError(ValueError):
    """On-disk bytes cannot be parsed as the declared file format."""
