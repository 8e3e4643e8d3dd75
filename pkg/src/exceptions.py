"""
Custom exceptions for the IA receive-diversity toolkit.
"""


class IAToolkitError(Exception):
    """Base exception for the toolkit."""
    pass


class DimensionError(IAToolkitError):
    """Invalid network dimensions or matrix shape mismatch."""
    pass


class DomainError(IAToolkitError):
    """Argument outside the mathematical domain of a function."""
    pass


class NumericalError(IAToolkitError):
    """Linear-algebra failure (eigendecomposition, singular matrix)."""
    pass


class NumericalPrecisionError(NumericalError):
    """Result lost too much relative accuracy to be trusted."""
    pass


class NonConvergenceError(IAToolkitError):
    """Monte-Carlo trial budget exhausted by non-converging draws."""

    def __init__(self, method: str, used: int, discarded: int):
        self.method = method
        self.used = used
        self.discarded = discarded
        super().__init__(
            f"{method}: only {used} usable trials after {used + discarded} draws"
        )


class ImproperSystemError(IAToolkitError):
    """IA requested on dimensions that fail the properness test."""
    pass


class ConfigError(IAToolkitError):
    """Invalid sweep specification or command-line usage."""
    pass


class CsvFormatError(IAToolkitError):
    """CSV file does not follow the sweep schema."""
    pass
