"""Input checks shared by the estimator-style classes."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils import check_array


def check_codes(X, n_categories: Sequence[int]) -> np.ndarray:
    """Validate an (n, d) array of category indices."""
    X = check_array(X, dtype=None, ensure_min_samples=0, ensure_all_finite=True)
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ValueError("category codes must be integers")
    X = X.astype(np.intp)
    if X.shape[1] != len(n_categories):
        raise ValueError(
            f"expected {len(n_categories)} code columns, got {X.shape[1]}"
        )
    for j, k in enumerate(n_categories):
        col = X[:, j]
        if col.size and (col.min() < 0 or col.max() >= k):
            raise ValueError(f"codes in column {j} must lie in [0, {k})")
    return X


def check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    if w.ndim != 1 or len(w) != n:
        raise ValueError(f"weights must be a vector of length {n}, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    return w


def check_fraction_grid(increments: Sequence[float], draw_size: int) -> list[int]:
    """Probability counts per increment; each fraction x draw_size must be whole."""
    counts = []
    for frac in increments:
        if not 0.0 <= frac <= 1.0:
            raise ValueError(f"probability fraction {frac} outside [0, 1]")
        k = frac * draw_size
        if abs(k - round(k)) > 1e-9:
            raise ValueError(
                f"fraction {frac} x draw_size {draw_size} is not a whole number"
            )
        counts.append(int(round(k)))
    return counts
