"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_states(X, dim: str) -> np.ndarray:
    """Validate an array of lake states.

    One-dimensional problems accept a flat array of ``P`` or a single
    column; two-dimensional ones need ``(k, 2)`` rows of ``(P, M)``.
    Negative densities are rejected.
    """
    if dim == "1d":
        X = np.asarray(X, dtype=float)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        X = check_array(np.atleast_1d(X), ensure_2d=False, dtype=float)
        if X.ndim != 1:
            raise ValueError(f"1-D states must be a flat array or one column, got shape {X.shape}")
    elif dim == "2d":
        X = check_array(np.atleast_2d(X), dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"2-D states need two columns (P, M), got shape {X.shape}")
    else:
        raise ValueError(f"dim must be '1d' or '2d', got {dim!r}")
    if np.any(X < 0):
        raise ValueError("lake states must be nonnegative")
    return X


def check_dim(dim: str, M) -> None:
    if dim not in ("1d", "2d"):
        raise ValueError(f"dim must be '1d' or '2d', got {dim!r}")
    if dim == "1d" and (M is None or not np.isfinite(M) or M < 0):
        raise ValueError("1-D problems need a constant nonnegative sediment level M")
