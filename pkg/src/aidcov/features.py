"""Per-image features and covariance descriptors.

Per-image descriptors are covariances of per-pixel feature vectors (Gabor
magnitudes and/or gradient features). The traditional set descriptor is the
covariance of resized, vectorized images across a set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .spd import make_spd

__all__ = [
    "FeatureKind",
    "FeatureSpec",
    "ImageSet",
    "FeatureError",
    "as_image",
    "gabor_bank",
    "gabor_features",
    "gradient_features",
    "image_features",
    "centering_matrix",
    "centered_covariance",
    "covd_of_features",
    "resize_bilinear",
    "traditional_set_covd",
    "MIN_IMAGE_SIDE",
]

MIN_IMAGE_SIDE = 8
#: above this many pixels the automatic stride switches from 1 to 2
AUTO_STRIDE_PIXELS = 10_000


class FeatureError(ValueError):
    pass


class FeatureKind(str, Enum):
    GABOR = "GABOR"
    GRADIENT = "GRADIENT"
    GABOR_PLUS_GRADIENT = "GABOR_PLUS_GRADIENT"


@dataclass(frozen=True)
class FeatureSpec:
    """Which per-pixel features to extract and how the Gabor bank is laid out.

    Wavelengths run geometrically from ``base_wavelength`` with ratio
    ``wavelength_ratio``; the Gaussian envelope has ``sigma = sigma_ratio *
    wavelength``; orientations are uniform over ``[0, pi)``. ``stride=None``
    picks 1, or 2 when an image has more than 10,000 pixels.
    """

    kind: FeatureKind = FeatureKind.GABOR_PLUS_GRADIENT
    scales: int = 5
    orientations: int = 8
    base_wavelength: float = 4.0
    wavelength_ratio: float = math.sqrt(2.0)
    sigma_ratio: float = 0.56
    stride: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))
        if self.scales < 1 or self.orientations < 1:
            raise ValueError("scales and orientations must be positive")
        if not (self.base_wavelength > 0 and self.wavelength_ratio > 0 and self.sigma_ratio > 0):
            raise ValueError("Gabor bank parameters must be positive")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def uses_gabor(self) -> bool:
        return self.kind is not FeatureKind.GRADIENT

    @property
    def uses_gradient(self) -> bool:
        return self.kind is not FeatureKind.GABOR

    @property
    def dim(self) -> int:
        d = self.scales * self.orientations if self.uses_gabor else 0
        return d + (5 if self.uses_gradient else 0)

    def wavelengths(self) -> np.ndarray:
        return self.base_wavelength * self.wavelength_ratio ** np.arange(self.scales)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "scales": self.scales,
            "orientations": self.orientations,
            "base_wavelength": self.base_wavelength,
            "wavelength_ratio": self.wavelength_ratio,
            "sigma_ratio": self.sigma_ratio,
            "stride": self.stride,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(**d)


@dataclass
class ImageSet:
    """Images sharing one label. ``name`` identifies the set inside its class."""

    label: str
    images: list = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        if len(self.images) == 0:
            raise FeatureError(f"image set {self.name!r} of class {self.label!r} is empty")

    def __len__(self) -> int:
        return len(self.images)


def as_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise FeatureError(f"expected a 2-D grayscale image, got shape {img.shape}")
    if min(img.shape) < MIN_IMAGE_SIDE:
        raise FeatureError(f"image {img.shape} is smaller than {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")
    if not np.all(np.isfinite(img)):
        raise FeatureError("image has non-finite pixels")
    return img


# ----------------------------------------------------------------------------
# Gabor bank


def _gabor_kernel(wavelength: float, theta: float, sigma: float, half: int) -> np.ndarray:
    y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    xr = x * math.cos(theta) + y * math.sin(theta)
    env = np.exp(-(x**2 + y**2) / (2.0 * sigma**2))
    env /= env.sum()
    g = env * np.exp(2j * math.pi * xr / wavelength)
    # subtract the DC term so the filter ignores constant intensity
    g -= env * (g.sum() / env.sum())
    return g


def gabor_bank(spec: FeatureSpec) -> list[np.ndarray]:
    """Complex zero-mean Gabor kernels, scale-major then orientation."""
    kernels = []
    for lam in spec.wavelengths():
        sigma = spec.sigma_ratio * lam
        half = int(math.ceil(3.0 * sigma))
        for o in range(spec.orientations):
            kernels.append(_gabor_kernel(lam, math.pi * o / spec.orientations, sigma, half))
    return kernels


@lru_cache(maxsize=32)
def _bank_fft(spec: FeatureSpec, shape: tuple[int, int]) -> tuple[np.ndarray, int]:
    bank = gabor_bank(spec)
    half = max(k.shape[0] // 2 for k in bank)
    ph, pw = shape[0] + 2 * half, shape[1] + 2 * half
    out = np.empty((len(bank), ph, pw), dtype=np.complex128)
    for i, k in enumerate(bank):
        r = k.shape[0] // 2
        buf = np.zeros((ph, pw), dtype=np.complex128)
        buf[: 2 * r + 1, : 2 * r + 1] = k
        # move the kernel centre to the origin for circular convolution
        buf = np.roll(buf, (-r, -r), axis=(0, 1))
        out[i] = np.fft.fft2(buf)
    out.setflags(write=False)
    return out, half


def _stride(spec: FeatureSpec, shape) -> int:
    if spec.stride is not None:
        return spec.stride
    return 2 if shape[0] * shape[1] > AUTO_STRIDE_PIXELS else 1


def gabor_magnitudes(img, spec: FeatureSpec) -> np.ndarray:
    """Gabor response magnitudes, shape ``(scales * orientations, h, w)``."""
    img = as_image(img)
    support = int(math.ceil(spec.wavelengths()[-1] - 1e-9))
    if min(img.shape) < support:
        raise FeatureError(
            f"image {img.shape} is smaller than the largest Gabor wavelength ({support} px)"
        )
    kfft, half = _bank_fft(spec, img.shape)
    padded = np.pad(img, half, mode="symmetric")
    resp = np.fft.ifft2(np.fft.fft2(padded)[None] * kfft)
    h, w = img.shape
    return np.abs(resp[:, half : half + h, half : half + w])


def gradient_maps(img) -> np.ndarray:
    """``(x/w, y/h, I, |dI/dx|, |dI/dy|)`` maps, shape ``(5, h, w)``."""
    img = as_image(img)
    h, w = img.shape
    p = np.pad(img, 1, mode="edge")
    dx = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    dy = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return np.stack([xx / w, yy / h, img, np.abs(dx), np.abs(dy)])


def _to_matrix(maps: np.ndarray, stride: int) -> np.ndarray:
    maps = maps[:, ::stride, ::stride]
    return maps.reshape(maps.shape[0], -1)


def gabor_features(img, spec: FeatureSpec | None = None) -> np.ndarray:
    """Feature matrix (d x p) with one column per pixel.

    Rows are the Gabor magnitudes, followed by the five gradient rows when
    ``spec.kind`` is GABOR_PLUS_GRADIENT.
    """
    spec = spec or FeatureSpec()
    if not spec.uses_gabor:
        raise FeatureError("gabor_features needs a GABOR feature kind")
    img = as_image(img)
    maps = gabor_magnitudes(img, spec)
    if spec.uses_gradient:
        maps = np.concatenate([maps, gradient_maps(img)])
    return _to_matrix(maps, _stride(spec, img.shape))


def gradient_features(img, stride: int = 1) -> np.ndarray:
    return _to_matrix(gradient_maps(img), stride)


def image_features(img, spec: FeatureSpec) -> np.ndarray:
    if spec.uses_gabor:
        return gabor_features(img, spec)
    img = as_image(img)
    return gradient_features(img, _stride(spec, img.shape))


# ----------------------------------------------------------------------------
# Covariances


def centering_matrix(p: int) -> np.ndarray:
    """``J = p^{-3/2} (p I - 1 1^T)``, so that ``J J^T = (I - 1 1^T / p) / p``."""
    if p < 1:
        raise ValueError("p must be positive")
    return p**-1.5 * (p * np.eye(p) - np.ones((p, p)))


def centered_covariance(f: np.ndarray) -> np.ndarray:
    """``F J J^T F^T`` for a ``d x p`` matrix, without forming ``J``.

    ``F J = (F - mean) / sqrt(p)`` column-wise, so the product is the
    population covariance of the columns.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[1] < 1:
        raise FeatureError(f"expected a d x p matrix with p >= 1, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise FeatureError("feature matrix has non-finite entries")
    # shifting by one column first keeps identical columns exactly zero
    g = f - f[:, :1]
    fj = (g - g.mean(axis=1, keepdims=True)) / math.sqrt(f.shape[1])
    c = fj @ fj.T
    return 0.5 * (c + c.T)


def covd_of_features(f: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Regularized covariance descriptor of a feature matrix."""
    return make_spd(centered_covariance(f), eps)


def resize_bilinear(img, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling."""
    img = np.asarray(img, dtype=np.float64)
    h, w = shape
    H, W = img.shape

    def coords(n_out, n_in):
        if n_out == 1:
            return np.zeros(1)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    ys, xs = coords(h, H), coords(w, W)
    y0 = np.clip(np.floor(ys).astype(int), 0, H - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def traditional_set_covd(
    images: Sequence | ImageSet, resize: tuple[int, int] = (20, 20), eps: float = 1e-3
) -> np.ndarray:
    """Covariance of the resized, column-major vectorized images of a set."""
    if isinstance(images, ImageSet):
        images = images.images
    if len(images) == 0:
        raise FeatureError("empty image set")
    cols = [resize_bilinear(as_image(im), resize).ravel(order="F") for im in images]
    return covd_of_features(np.stack(cols, axis=1), eps)
