"""Dense linear-algebra helpers with explicit tolerance conventions.

Thin wrappers around LAPACK via numpy/scipy; everything here is deterministic
for fixed inputs, which the CLI relies on for byte-identical reruns.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .errors import NotSymmetricError


def default_rcond(shape: tuple[int, int]) -> float:
    """Singular-value cutoff ratio: max(rows, cols) times machine epsilon."""
    return max(shape) * np.finfo(float).eps


def pseudoinverse(a: np.ndarray, rcond: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse with an SVD cutoff relative to sigma_max."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("pseudoinverse expects a matrix")
    if rcond is None:
        rcond = default_rcond(a.shape)
    return np.linalg.pinv(a, rcond=rcond)


def lstsq(a: np.ndarray, rhs: np.ndarray, damping: float = 0.0) -> np.ndarray:
    """Minimize ||a z - rhs||^2 + damping ||z||^2.

    With damping == 0 this is the minimum-norm least-squares solution.  A
    positive damping is handled by stacking sqrt(damping) * I under `a`, which
    is better conditioned than forming the normal equations.
    """
    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if a.ndim != 2 or rhs.ndim != 1 or rhs.shape[0] != a.shape[0]:
        raise ValueError("incompatible shapes for lstsq")
    if damping < 0.0:
        raise ValueError("damping must be nonnegative")
    if damping > 0.0:
        k = a.shape[1]
        a = np.vstack([a, math.sqrt(damping) * np.eye(k)])
        rhs = np.concatenate([rhs, np.zeros(k)])
    sol, _, _, _ = scipy.linalg.lstsq(a, rhs, lapack_driver="gelsy", check_finite=False)
    return sol


def eig_sym(s: np.ndarray, eig_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    Raises:
        NotSymmetricError: relative asymmetry exceeds eig_tol.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("eig_sym expects a square matrix")
    scale = np.linalg.norm(s)
    if np.linalg.norm(s - s.T) > eig_tol * max(scale, 1.0):
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    w, q = np.linalg.eigh(s)
    return w, q


def numerical_rank(a: np.ndarray, rcond: float | None = None) -> int:
    """Number of singular values above rcond * sigma_max."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("numerical_rank expects a matrix")
    if a.size == 0:
        return 0
    if rcond is None:
        rcond = default_rcond(a.shape)
    sigma = np.linalg.svd(a, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > rcond * sigma[0]))
