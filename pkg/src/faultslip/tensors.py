"""Symmetric 2x2 tensor kinematics on packed component arrays.

Symmetric tensors are stored as (..., 3) arrays (t11, t22, t12) with the
true (tensor) shear component; trace-free tensors as (..., 2) arrays
(t11, t12) with t22 = -t11 implied by storage.  Trace, deviator and norms
are intrinsic 2-D operations throughout.
"""

from __future__ import annotations

import numpy as np


def tr(t: np.ndarray) -> np.ndarray:
    """Trace of packed symmetric tensors."""
    return t[..., 0] + t[..., 1]


def dev(t: np.ndarray) -> np.ndarray:
    """Deviatoric part as trace-free pairs (d11, d12)."""
    return np.stack([0.5 * (t[..., 0] - t[..., 1]), t[..., 2]], axis=-1)


def norm_sq(t: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm of packed symmetric tensors."""
    return t[..., 0] ** 2 + t[..., 1] ** 2 + 2.0 * t[..., 2] ** 2


def norm(t: np.ndarray) -> np.ndarray:
    return np.sqrt(norm_sq(t))


def devnorm_sq(d: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm of trace-free pairs."""
    return 2.0 * (d[..., 0] ** 2 + d[..., 1] ** 2)


def devnorm(d: np.ndarray) -> np.ndarray:
    return np.sqrt(devnorm_sq(d))


def full(d: np.ndarray) -> np.ndarray:
    """Expand trace-free pairs to packed symmetric (t11, t22, t12)."""
    return np.stack([d[..., 0], -d[..., 0], d[..., 1]], axis=-1)
