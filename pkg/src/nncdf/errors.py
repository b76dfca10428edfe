class DimensionError(ValueError):
    """Raised when array shapes do not chain."""
