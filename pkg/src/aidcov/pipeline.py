"""Set descriptors: approximate infinite-dimensional CovDs and the traditional baseline."""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import (
    FeatureError,
    FeatureSpec,
    ImageSet,
    centered_covariance,
    covd_of_features,
    image_features,
    traditional_set_covd,
)
from .metrics import log_stack
from .nystrom import NystromModel, embed_logs
from .spd import SpdError, make_spd

__all__ = [
    "Method",
    "SetDescriptor",
    "image_covds",
    "aid_covd",
    "aid_covd_from_logs",
    "traditional_covd",
    "DescriptorCache",
    "config_hash",
]


class Method(str, Enum):
    AID = "AID"
    TRADITIONAL = "TRADITIONAL"


@dataclass(frozen=True)
class SetDescriptor:
    label: str
    matrix: np.ndarray
    method: Method


def image_covds(
    images: Sequence | ImageSet,
    fspec: FeatureSpec | None = None,
    eps: float = 1e-3,
    jobs: int = 1,
) -> list[np.ndarray]:
    """One regularized feature covariance per image."""
    fspec = fspec or FeatureSpec()
    if isinstance(images, ImageSet):
        images = images.images
    if len(images) == 0:
        raise FeatureError("empty image set")

    def one(img):
        return covd_of_features(image_features(img, fspec), eps)

    if jobs > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, images))
    return [one(im) for im in images]


def aid_covd_from_logs(model: NystromModel, logs: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Covariance of the Nyström embeddings of per-image CovDs given as logs."""
    if logs.shape[0] == 0:
        raise FeatureError("empty image set")
    z = embed_logs(model, logs)
    return make_spd(centered_covariance(z), eps)


def aid_covd(
    images: ImageSet | Sequence,
    model: NystromModel,
    fspec: FeatureSpec | None = None,
    eps: float = 1e-3,
    label: str | None = None,
    covds: Sequence[np.ndarray] | None = None,
) -> SetDescriptor:
    """Approximate infinite-dimensional CovD (``D x D``) of an image set.

    Precomputed per-image CovDs may be passed as ``covds`` to skip feature
    extraction.
    """
    if covds is None:
        covds = image_covds(images, fspec, eps)
    if len(covds) == 0:
        raise FeatureError("empty image set")
    if np.shape(covds[0]) != model.landmark_logs.shape[1:]:
        raise SpdError(
            f"per-image CovDs are {np.shape(covds[0])} but the model expects "
            f"{model.landmark_logs.shape[1:]}"
        )
    if label is None:
        label = images.label if isinstance(images, ImageSet) else ""
    matrix = aid_covd_from_logs(model, log_stack(covds), eps)
    return SetDescriptor(label, matrix, Method.AID)


def traditional_covd(
    images: ImageSet | Sequence, resize: tuple[int, int] = (20, 20), eps: float = 1e-3
) -> SetDescriptor:
    label = images.label if isinstance(images, ImageSet) else ""
    return SetDescriptor(label, traditional_set_covd(images, resize, eps), Method.TRADITIONAL)


def config_hash(obj) -> str:
    """Short stable hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


class DescriptorCache:
    """On-disk store of per-set arrays keyed by (dataset, set id, kind, config hash).

    Each entry is an ``.npy`` file with a JSON sidecar recording provenance.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def _stem(self, dataset: str, set_id: str, kind: str, chash: str) -> Path:
        safe = set_id.replace("/", "__")
        return self.root / dataset / kind / f"{safe}.{chash}"

    def get(self, dataset: str, set_id: str, kind: str, chash: str):
        stem = self._stem(dataset, set_id, kind, chash)
        path = stem.with_suffix(stem.suffix + ".npy")
        if path.exists():
            self.hits += 1
            return np.load(path)
        return None

    def put(self, dataset, set_id, kind, chash, array, provenance: dict | None = None) -> None:
        stem = self._stem(dataset, set_id, kind, chash)
        stem.parent.mkdir(parents=True, exist_ok=True)
        np.save(stem.with_suffix(stem.suffix + ".npy"), np.asarray(array))
        side = {"dataset": dataset, "set": set_id, "kind": kind, "config_hash": chash}
        side.update(provenance or {})
        stem.with_suffix(stem.suffix + ".json").write_text(
            json.dumps(side, sort_keys=True, indent=2), encoding="utf-8"
        )

    def get_or_compute(self, dataset, set_id, kind, chash, compute, provenance=None):
        arr = self.get(dataset, set_id, kind, chash)
        if arr is None:
            self.misses += 1
            arr = np.asarray(compute())
            self.put(dataset, set_id, kind, chash, arr, provenance)
        return arr
