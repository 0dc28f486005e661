"""Input validation helpers shared by the estimator classes."""

from __future__ import annotations

import numpy as np

__all__ = ["check_snapshot_matrix", "check_hermitian", "EstimationError"]


class EstimationError(RuntimeError):
    """Raised when an estimator cannot produce the requested number of sources."""


def check_snapshot_matrix(x, *, want_complex: bool | None = None,
                          min_channels: int = 1) -> np.ndarray:
    """Validate a channels x samples matrix and return it as an ndarray."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D channels x samples matrix, got shape {x.shape}")
    if x.shape[0] < min_channels:
        raise ValueError(f"need at least {min_channels} channels, got {x.shape[0]}")
    if x.shape[1] < 1:
        raise ValueError("need at least one sample")
    if want_complex is True and not np.iscomplexobj(x):
        raise ValueError("expected complex (analytic) samples")
    if want_complex is False and np.iscomplexobj(x):
        raise ValueError("expected real samples")
    if not np.all(np.isfinite(x.real)) or (np.iscomplexobj(x) and not np.all(np.isfinite(x.imag))):
        raise ValueError("samples contain non-finite values")
    return x


def check_hermitian(r, rtol: float = 1e-10) -> np.ndarray:
    """Validate a Hermitian matrix (relative tolerance) and return it."""
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {r.shape}")
    scale = max(float(np.abs(r).max()), 1e-300)
    if float(np.abs(r - r.conj().T).max()) > rtol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return r
