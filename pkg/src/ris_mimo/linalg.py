"""Hermitian matrix helpers shared by the sampling and estimation code."""
from __future__ import annotations

import numpy as np


def hermitian_sqrt(A: np.ndarray) -> np.ndarray:
    """PSD square root via eigendecomposition; negative eigenvalues are clipped to 0."""
    A = 0.5 * (A + np.swapaxes(A, -1, -2).conj())
    w, V = np.linalg.eigh(A)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (V * w[..., None, :]) @ np.swapaxes(V, -1, -2).conj()


def hermitian_pinv(A: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Inverse of a Hermitian PSD matrix, pseudo-inverse when it is singular.

    Eigenvalues below ``rtol * max eigenvalue`` are treated as zero.
    Works on stacks of matrices.
    """
    A = 0.5 * (A + np.swapaxes(A, -1, -2).conj())
    w, V = np.linalg.eigh(A)
    top = np.max(np.abs(w), axis=-1, keepdims=True)
    keep = w > rtol * top
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return (V * inv[..., None, :]) @ np.swapaxes(V, -1, -2).conj()


def is_hermitian_psd(A: np.ndarray, atol: float = 1e-10) -> bool:
    if np.max(np.abs(A - A.conj().T), initial=0.0) > atol:
        return False
    w = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    scale = max(1.0, float(np.real(np.trace(A))))
    return bool(w.min(initial=0.0) >= -atol * scale)
