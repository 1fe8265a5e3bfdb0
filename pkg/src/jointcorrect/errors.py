"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid hyperparameter, schedule value or config key."""


class DimensionError(ValueError):
    """Array shapes that do not compose."""


class NumericError(ArithmeticError):
    def __init__(self, message, layer=None, batch=None):
        super().__init__(message)
        self.layer = layer
        self.batch = batch


class EmptySelectionError(ValueError):
    """A loss reduction was requested over zero selected examples."""


class FormatError(ValueError):
    """Dataset file whose structure or values violate the CSV format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(FormatError):
    """A row that cannot be parsed as numbers."""
