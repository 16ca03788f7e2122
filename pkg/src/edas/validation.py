"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ContractError, InvalidTopologyError

STOCHASTIC_TOL = 1e-12


def check_mixing_matrix(W, *, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    """Validate a symmetric, nonnegative, row-stochastic matrix.

    Returns a float64 copy.  Raises :class:`InvalidTopologyError` when any
    of the mixing-matrix properties fail.
    """
    W = check_array(W, dtype=np.float64, ensure_2d=True, copy=True, ensure_min_samples=1)
    n, m = W.shape
    if n != m:
        raise InvalidTopologyError(f"mixing matrix must be square, got {W.shape}")
    if not np.array_equal(W, W.T):
        asym = float(np.max(np.abs(W - W.T)))
        if asym > 1e-14:
            raise InvalidTopologyError(f"mixing matrix is not symmetric (max asymmetry {asym:.3e})")
        W = 0.5 * (W + W.T)
    if np.any(W < 0):
        raise InvalidTopologyError("mixing matrix has negative entries")
    dev = float(np.max(np.abs(W.sum(axis=1) - 1.0)))
    if dev > tol:
        raise InvalidTopologyError(f"rows do not sum to one (max deviation {dev:.3e})")
    return W


def check_iterates(X, n: int, p: int, name: str = "X") -> np.ndarray:
    """Check that ``X`` has trailing shape ``(n, p)`` (leading batch axes allowed)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < 2 or X.shape[-2:] != (n, p):
        raise ContractError(f"{name} must have trailing shape ({n}, {p}), got {X.shape}")
    return X


def check_same_shape(**arrays) -> None:
    shapes = {k: np.shape(v) for k, v in arrays.items()}
    if len(set(shapes.values())) > 1:
        detail = ", ".join(f"{k}{s}" for k, s in shapes.items())
        raise ContractError(f"shape mismatch: {detail}")
