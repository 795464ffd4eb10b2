"""
Central finite differences for checking analytic gradients.
"""

import numpy as np


def numerical_gradient(fn, values: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """d fn() / d values, perturbing `values` in place and restoring it."""
    grad = np.zeros_like(values)
    it = np.nditer(values, flags=["multi_index"])
    for _ in it:
        index = it.multi_index
        original = values[index]
        values[index] = original + step
        plus = fn()
        values[index] = original - step
        minus = fn()
        values[index] = original
        grad[index] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error; 0 when both are exactly zero."""
    diff = np.linalg.norm(np.ravel(analytic) - np.ravel(numeric))
    scale = np.linalg.norm(np.ravel(analytic)) + np.linalg.norm(np.ravel(numeric))
    return float(diff / scale) if scale > 0 else float(diff)
