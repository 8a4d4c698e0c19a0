"""Symmetric and SPD matrices: validation, eigendecomposition and matrix functions.

SPD and symmetric matrices are carried as plain float64 ``ndarray`` objects.
The ``as_*`` helpers validate them; everything else is a pure function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpdError",
    "EigenPair",
    "as_sym",
    "as_spd",
    "sym_eig",
    "log_spd",
    "exp_sym",
    "make_spd",
    "inv_sqrt_spd",
    "SYM_TOL",
    "EXP_MAX",
]

#: relative tolerance on asymmetry, scaled by max(1, ||A||_F)
SYM_TOL = 1e-10
#: largest eigenvalue accepted by exp_sym before overflow becomes likely
EXP_MAX = 700.0


class SpdError(ValueError):
    """Raised when a matrix fails symmetry or positive-definiteness checks."""


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues in descending order and the matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def _square(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise SpdError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SpdError("matrix has non-finite entries")
    return a


def as_sym(a) -> np.ndarray:
    """Return ``a`` as a float64 array after checking symmetry.

    Asymmetric input is rejected rather than symmetrized; use
    :func:`make_spd` for the explicit symmetrizing path.
    """
    a = _square(a)
    scale = max(1.0, float(np.linalg.norm(a)))
    asym = float(np.max(np.abs(a - a.T)))
    if asym > SYM_TOL * scale:
        raise SpdError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    return a


def as_spd(a) -> np.ndarray:
    """Validate a symmetric positive-definite matrix."""
    a = as_sym(a)
    lam_min = float(np.linalg.eigvalsh(a)[0])
    if not lam_min > 0.0:
        raise SpdError(f"matrix is not positive definite (lambda_min = {lam_min:.3e})")
    return a


def sym_eig(m) -> EigenPair:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    m = as_sym(m)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        diag = np.diag(m)
        raise SpdError(
            "symmetric eigensolver did not converge "
            f"(n={m.shape[0]}, ||A||_F={np.linalg.norm(m):.3e}, "
            f"diag range=[{diag.min():.3e}, {diag.max():.3e}])"
        ) from exc
    return EigenPair(w[::-1].copy(), v[:, ::-1].copy())


def log_spd(m) -> np.ndarray:
    """Matrix logarithm of an SPD matrix: V diag(ln w) V^T."""
    m = as_sym(m)
    w, v = np.linalg.eigh(m)
    if not w[0] > 0.0:
        raise SpdError(f"log_spd needs a positive-definite matrix (lambda_min = {w[0]:.3e})")
    out = (v * np.log(w)) @ v.T
    return 0.5 * (out + out.T)


def exp_sym(m) -> np.ndarray:
    """Matrix exponential of a symmetric matrix; the result is SPD."""
    m = as_sym(m)
    w, v = np.linalg.eigh(m)
    if w[-1] > EXP_MAX:
        raise SpdError(f"exp_sym overflow: eigenvalue {w[-1]:.3e} exceeds {EXP_MAX}")
    out = (v * np.exp(w)) @ v.T
    return 0.5 * (out + out.T)


def inv_sqrt_spd(m) -> np.ndarray:
    """``m^{-1/2}`` from the eigendecomposition of an SPD matrix."""
    m = as_sym(m)
    w, v = np.linalg.eigh(m)
    if not w[0] > 0.0:
        raise SpdError(f"inverse square root needs an SPD matrix (lambda_min = {w[0]:.3e})")
    out = (v / np.sqrt(w)) @ v.T
    return 0.5 * (out + out.T)


def make_spd(data, eps: float = 1e-3) -> np.ndarray:
    """Symmetrize and ridge-regularize a square matrix into an SPD matrix.

    The ridge is ``eps * trace(S) / n`` where ``S = (A + A^T) / 2``, which keeps
    ``eps`` unit-free. When the trace is not positive the ridge is ``eps``.
    """
    if eps < 0 or not np.isfinite(eps):
        raise SpdError(f"eps must be a finite nonnegative number, got {eps}")
    a = _square(data)
    s = 0.5 * (a + a.T)
    n = s.shape[0]
    tr = float(np.trace(s))
    ridge = eps * tr / n if tr > 0 else eps
    if ridge:
        s = s + ridge * np.eye(n)
    lam_min = float(np.linalg.eigvalsh(s)[0])
    if not lam_min > 0.0:
        raise SpdError(
            f"regularized matrix is not positive definite (lambda_min = {lam_min:.3e}); "
            "use a larger eps"
        )
    return s
