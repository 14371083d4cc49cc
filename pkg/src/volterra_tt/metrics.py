"""Error metrics with transient-free evaluation.

Both metrics accept a ``skip`` count that discards the leading samples
whose lagged inputs reach before the start of the record.
"""

from __future__ import annotations

import numpy as np


def _aligned(y, y_hat, skip):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    y_hat = np.atleast_2d(np.asarray(y_hat, dtype=float))
    if y.shape[0] == 1 and y.size > 1:
        y, y_hat = y.T, y_hat.T
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if not 0 <= skip < y.shape[0]:
        raise ValueError(f"skip {skip} leaves no samples out of {y.shape[0]}")
    return y[skip:], y_hat[skip:]


def rmse(y, y_hat, skip: int = 0) -> float:
    """Root mean square error over samples ``skip..N-1``, pooled over outputs."""
    y, y_hat = _aligned(y, y_hat, skip)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def vaf(y, y_hat, skip: int = 0) -> float:
    """Variance accounted for: ``1 - var(y - y_hat) / var(y)``.

    Computed per output and averaged; a perfect prediction scores 1, a
    constant prediction at the target mean scores 0.
    """
    y, y_hat = _aligned(y, y_hat, skip)
    vy = y.var(axis=0)
    if np.any(vy <= 0):
        raise ValueError("target has zero variance over the evaluated range")
    return float(np.mean(1.0 - (y - y_hat).var(axis=0) / vy))
