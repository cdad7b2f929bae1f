class DomainError(ValueError):
    """Argument outside the domain of definition of an operation."""


class ConfigurationError(ValueError):
    """Inputs are individually valid but cannot be combined into a usable discretization."""


class DimensionMismatch(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass
