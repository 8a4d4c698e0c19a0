"""Nyström embedding of SPD matrices under a Log-Euclidean kernel.

A model keeps the top eigenpairs ``(E, V)`` of the landmark Gram matrix and
maps any SPD matrix ``Y`` to ``Z(Y) = E^{-1/2} V^T k(Y, landmarks)``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import KernelSpec, gram_from_logs, kernel_from_logs, log_stack
from .spd import SpdError, log_spd

__all__ = [
    "NystromModel",
    "DegenerateKernelError",
    "nystrom_fit",
    "nystrom_embed",
    "nystrom_batch_embed",
    "save_model",
    "load_model",
    "PSD_FLOOR",
    "MODEL_MAGIC",
]

#: eigenvalues at or below PSD_FLOOR * lambda_max are treated as zero
PSD_FLOOR = 1e-10
MODEL_MAGIC = "aidcov-nystrom"
MODEL_VERSION = 1


class DegenerateKernelError(SpdError):
    pass


@dataclass(frozen=True)
class NystromModel:
    """Fitted Nyström model.

    ``landmark_logs`` has shape ``(M, n, n)``; ``eigvals`` holds the ``D``
    retained eigenvalues (descending) and ``eigvecs`` the ``M x D``
    eigenvectors, each signed so its largest-magnitude entry is positive.
    """

    spec: KernelSpec
    landmark_logs: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    requested_dim: int
    notes: tuple[str, ...] = field(default=())

    @property
    def dim(self) -> int:
        return int(self.eigvals.shape[0])

    @property
    def n_landmarks(self) -> int:
        return int(self.landmark_logs.shape[0])

    @property
    def matrix_dim(self) -> int:
        return int(self.landmark_logs.shape[1])

    def landmark_features(self) -> np.ndarray:
        """``Z = E^{1/2} V^T``, the embedding of the landmarks themselves."""
        return np.sqrt(self.eigvals)[:, None] * self.eigvecs.T


def _fix_signs(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def fit_from_logs(logs: np.ndarray, spec: KernelSpec, dim: int) -> NystromModel:
    m = logs.shape[0]
    if not 1 <= dim <= m:
        raise ValueError(f"target dimension must satisfy 1 <= D <= M={m}, got {dim}")
    k = gram_from_logs(spec, logs)
    w, v = np.linalg.eigh(k)
    w, v = w[::-1], v[:, ::-1]
    floor = PSD_FLOOR * max(float(w[0]), 0.0)
    keep = int(np.count_nonzero(w[:dim] > floor))
    if keep < 1:
        raise DegenerateKernelError(
            f"kernel matrix has no eigenvalue above the PSD floor (lambda_max = {w[0]:.3e})"
        )
    notes = ()
    if keep < dim:
        msg = f"Gram rank deficient: target dimension reduced from {dim} to {keep}"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes = (msg,)
    vecs = _fix_signs(np.ascontiguousarray(v[:, :keep]))
    return NystromModel(spec, logs, w[:keep].copy(), vecs, dim, notes)


def nystrom_fit(train: Sequence[np.ndarray], spec: KernelSpec, dim: int) -> NystromModel:
    """Fit a model on the landmark SPD matrices ``train``."""
    return fit_from_logs(log_stack(train), spec, dim)


def embed_logs(model: NystromModel, logs: np.ndarray) -> np.ndarray:
    """Embed matrices given by their logarithms; returns ``D x N``."""
    logs = np.asarray(logs, dtype=np.float64)
    if logs.shape[0] == 0:
        return np.zeros((model.dim, 0))
    if logs.shape[1:] != model.landmark_logs.shape[1:]:
        raise SpdError(
            f"dimension mismatch: model uses {model.matrix_dim}x{model.matrix_dim}, "
            f"got {logs.shape[1]}x{logs.shape[2]}"
        )
    kx = kernel_from_logs(model.spec, model.landmark_logs, logs)  # M x N
    return (model.eigvecs.T @ kx) / np.sqrt(model.eigvals)[:, None]


def nystrom_embed(model: NystromModel, y: np.ndarray) -> np.ndarray:
    """D-vector approximating ``y`` in the kernel feature space."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != model.landmark_logs.shape[1:]:
        raise SpdError(f"dimension mismatch: expected {model.landmark_logs.shape[1:]}, got {y.shape}")
    return embed_logs(model, log_spd(y)[None])[:, 0]


def nystrom_batch_embed(model: NystromModel, ys: Sequence[np.ndarray]) -> np.ndarray:
    if len(ys) == 0:
        return np.zeros((model.dim, 0))
    return embed_logs(model, log_stack(ys))


def save_model(model: NystromModel, path) -> None:
    """Write a model as JSON. Landmark logs are stored instead of the landmarks."""
    doc = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "kernel": model.spec.to_dict(),
        "requested_dim": model.requested_dim,
        "notes": list(model.notes),
        "eigvals": model.eigvals.tolist(),
        "eigvecs": model.eigvecs.tolist(),
        "landmark_logs": model.landmark_logs.tolist(),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path) -> NystromModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("magic") != MODEL_MAGIC:
        raise ValueError(f"{path} is not a Nyström model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    return NystromModel(
        spec=KernelSpec.from_dict(doc["kernel"]),
        landmark_logs=np.asarray(doc["landmark_logs"], dtype=np.float64),
        eigvals=np.asarray(doc["eigvals"], dtype=np.float64),
        eigvecs=np.asarray(doc["eigvecs"], dtype=np.float64),
        requested_dim=int(doc["requested_dim"]),
        notes=tuple(doc.get("notes", ())),
    )
