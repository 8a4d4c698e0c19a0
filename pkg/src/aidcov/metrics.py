"""Riemannian distances and Log-Euclidean kernels on the SPD manifold."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .spd import SpdError, as_sym, inv_sqrt_spd, log_spd

__all__ = [
    "KernelKind",
    "KernelSpec",
    "airm_dist",
    "lem_dist",
    "loge_inner",
    "kernel_eval",
    "kernel_from_logs",
    "gram",
    "gram_from_logs",
    "log_stack",
]


class KernelKind(str, Enum):
    LOGE_LINEAR = "LOGE_LINEAR"
    LOGE_POLY = "LOGE_POLY"
    LOGE_EXP = "LOGE_EXP"
    LOGE_GAUSS = "LOGE_GAUSS"


@dataclass(frozen=True)
class KernelSpec:
    """A Log-Euclidean kernel.

    ``coeffs[k]`` multiplies ``x**k`` in the polynomial ``p`` used by the
    POLY and EXP kinds, so ``coeffs=(0, 0, 1)`` is ``p(x) = x**2``. Every
    coefficient must be nonnegative and the leading one positive; this keeps
    ``p`` of the Log-Euclidean inner product a positive-definite kernel.
    ``bandwidth`` scales the squared Log-Euclidean distance for GAUSS.
    """

    kind: KernelKind = KernelKind.LOGE_LINEAR
    degree: int | None = None
    coeffs: tuple[float, ...] | None = None
    bandwidth: float | None = None

    def __post_init__(self):
        kind = KernelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (KernelKind.LOGE_POLY, KernelKind.LOGE_EXP):
            coeffs = self.coeffs
            if coeffs is None:
                coeffs = (0.0, 0.0, 1.0) if kind is KernelKind.LOGE_POLY else (0.0, 1.0)
            coeffs = tuple(float(c) for c in coeffs)
            degree = len(coeffs) - 1 if self.degree is None else int(self.degree)
            if degree < 1:
                raise ValueError(f"polynomial degree must be >= 1, got {degree}")
            if len(coeffs) != degree + 1:
                raise ValueError(
                    f"degree {degree} needs {degree + 1} coefficients, got {len(coeffs)}"
                )
            if any(c < 0 or not np.isfinite(c) for c in coeffs) or coeffs[-1] <= 0:
                raise ValueError(
                    "polynomial coefficients must be nonnegative with a positive leading term"
                )
            object.__setattr__(self, "coeffs", coeffs)
            object.__setattr__(self, "degree", degree)
            object.__setattr__(self, "bandwidth", None)
        elif kind is KernelKind.LOGE_GAUSS:
            beta = 1.0 if self.bandwidth is None else float(self.bandwidth)
            if not beta > 0 or not np.isfinite(beta):
                raise ValueError(f"bandwidth must be positive, got {beta}")
            object.__setattr__(self, "bandwidth", beta)
            object.__setattr__(self, "degree", None)
            object.__setattr__(self, "coeffs", None)
        else:
            object.__setattr__(self, "degree", None)
            object.__setattr__(self, "coeffs", None)
            object.__setattr__(self, "bandwidth", None)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "degree": self.degree,
            "coeffs": list(self.coeffs) if self.coeffs is not None else None,
            "bandwidth": self.bandwidth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        coeffs = d.get("coeffs")
        return cls(
            kind=d.get("kind", "LOGE_LINEAR"),
            degree=d.get("degree"),
            coeffs=tuple(coeffs) if coeffs is not None else None,
            bandwidth=d.get("bandwidth"),
        )


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise SpdError(f"dimension mismatch: {a.shape} vs {b.shape}")


def airm_dist(a, b) -> float:
    """Affine-invariant geodesic distance ``||log(a^-1/2 b a^-1/2)||_F``."""
    a = as_sym(a)
    b = as_sym(b)
    _same_dim(a, b)
    w = inv_sqrt_spd(a)
    m = w @ b @ w
    lam = np.linalg.eigvalsh(0.5 * (m + m.T))
    if not lam[0] > 0:
        raise SpdError("airm_dist needs SPD arguments")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def lem_dist(a, b) -> float:
    """Log-Euclidean distance ``||log a - log b||_F``."""
    a = as_sym(a)
    b = as_sym(b)
    _same_dim(a, b)
    return float(np.linalg.norm(log_spd(a) - log_spd(b)))


def loge_inner(a, b) -> float:
    """Log-Euclidean inner product ``tr(log a log b)``."""
    a = as_sym(a)
    b = as_sym(b)
    _same_dim(a, b)
    return float(np.sum(log_spd(a) * log_spd(b)))


def _poly(coeffs: Sequence[float], x):
    out = np.zeros_like(x, dtype=np.float64)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def kernel_from_logs(spec: KernelSpec, la: np.ndarray, lb: np.ndarray) -> np.ndarray:
    """Kernel values between two stacks of matrix logarithms.

    ``la`` has shape ``(m, n, n)`` and ``lb`` shape ``(k, n, n)``; returns the
    ``(m, k)`` matrix of kernel values. Pairwise inner products are sums of
    elementwise products of the flattened logs.
    """
    la = np.asarray(la, dtype=np.float64)
    lb = np.asarray(lb, dtype=np.float64)
    if la.shape[1:] != lb.shape[1:]:
        raise SpdError(f"dimension mismatch: {la.shape[1:]} vs {lb.shape[1:]}")
    fa = la.reshape(la.shape[0], -1)
    fb = lb.reshape(lb.shape[0], -1)
    inner = fa @ fb.T
    kind = spec.kind
    if kind is KernelKind.LOGE_LINEAR:
        return inner
    if kind is KernelKind.LOGE_POLY:
        return _poly(spec.coeffs, inner)
    if kind is KernelKind.LOGE_EXP:
        return np.exp(_poly(spec.coeffs, inner))
    na = np.einsum("ij,ij->i", fa, fa)
    nb = np.einsum("ij,ij->i", fb, fb)
    sq = np.maximum(na[:, None] + nb[None, :] - 2.0 * inner, 0.0)
    return np.exp(-spec.bandwidth * sq)


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = as_sym(a)
    b = as_sym(b)
    _same_dim(a, b)
    if spec.kind is KernelKind.LOGE_GAUSS:
        # direct difference keeps k(a, a) exactly 1
        d2 = float(np.sum((log_spd(a) - log_spd(b)) ** 2))
        return float(np.exp(-spec.bandwidth * d2))
    la = log_spd(a)[None]
    lb = log_spd(b)[None]
    return float(kernel_from_logs(spec, la, lb)[0, 0])


def log_stack(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix logarithms of a homogeneous list of SPD matrices, shape ``(m, n, n)``."""
    if len(mats) == 0:
        raise SpdError("empty set of matrices")
    shape = np.shape(mats[0])
    out = np.empty((len(mats),) + tuple(shape))
    for i, m in enumerate(mats):
        if np.shape(m) != shape:
            raise SpdError(f"dimension mismatch at index {i}: {np.shape(m)} vs {shape}")
        out[i] = log_spd(m)
    return out


def gram_from_logs(spec: KernelSpec, logs: np.ndarray) -> np.ndarray:
    k = kernel_from_logs(spec, logs, logs)
    k = 0.5 * (k + k.T)
    if spec.kind is KernelKind.LOGE_GAUSS:
        np.fill_diagonal(k, 1.0)
    return k


def gram(spec: KernelSpec, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Gram matrix ``K[i, j] = k(mats[i], mats[j])``; each log is computed once."""
    return gram_from_logs(spec, log_stack(mats))
