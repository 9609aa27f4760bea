class ConfigurationError(ValueError):
    """Invalid run configuration or grid sizes."""


class NumericalError(RuntimeError):
    """Non-finite intermediate or failed numerical subroutine."""
