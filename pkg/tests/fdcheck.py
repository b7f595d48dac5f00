"""Shared central finite-difference gradient harness for the test suite."""

import numpy as np


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f() w.r.t. array x (mutated in place)."""
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + eps
        f_plus = f()
        flat_x[i] = orig - eps
        f_minus = f()
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray,
                floor: float = 1e-8) -> float:
    """Largest |a - n| / (|a| + |n|), measured where the denominator clears floor."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.abs(analytic) + np.abs(numeric)
    mask = denom > floor
    if not mask.any():
        return 0.0
    return float((np.abs(analytic - numeric)[mask] / denom[mask]).max())
