"""
Exception hierarchy shared by every package in the simulator.

All errors raised on purpose derive from UrvflError so callers (the CLI in
particular) can separate simulator failures from programming errors.
"""


class UrvflError(Exception):
    """Base class for simulator errors."""


class ShapeError(UrvflError, ValueError):
    """Tensor or network dimensions do not line up."""

    def __init__(self, message: str, layer_index: int = None):
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class ContractError(UrvflError):
    """An operation was called outside its contract (bad state or arguments)."""


class GraphReuseError(ContractError):
    """backward() was called on a graph that was already consumed."""


class NonFiniteError(UrvflError, FloatingPointError):
    """NaN or inf showed up where finite values are required."""


class DataError(UrvflError, ValueError):
    """Dataset, CSV, partition or split problem."""


class ConfigError(UrvflError, ValueError):
    """Invalid experiment configuration; `errors` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ReportError(UrvflError, OSError):
    """Report or export could not be written."""
