"""Classifiers for SPD descriptors: nearest neighbour (AIRM / LEM), CDL and LogEKSR.

Ties are always broken towards the lowest training index or the lowest class
id in sorted order, which makes every prediction deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .metrics import KernelSpec, KernelKind, gram_from_logs, kernel_from_logs, log_stack
from .spd import SpdError, as_sym, inv_sqrt_spd, log_spd

__all__ = [
    "logvec",
    "logvec_from_log",
    "pairwise_dist",
    "nn_classify",
    "CdlModel",
    "cdl_fit",
    "cdl_predict",
    "SrcModel",
    "SparseCodingError",
    "sparse_code",
    "src_fit",
    "src_predict",
    "src_residuals",
]


def logvec_from_log(l: np.ndarray) -> np.ndarray:
    """Half-vectorize a symmetric matrix, off-diagonals scaled by sqrt(2).

    Entries are taken row by row from the upper triangle, so for n = 2 the
    order is (m11, m12, m22).
    """
    l = np.asarray(l)
    n = l.shape[-1]
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return l[..., iu[0], iu[1]] * scale


def logvec(m) -> np.ndarray:
    """Isometric vector of ``log(m)``: ``<logvec(a), logvec(b)> = tr(log a log b)``."""
    return logvec_from_log(log_spd(m))


def _check_train(train, labels):
    if len(train) == 0:
        raise ValueError("training set is empty")
    if len(train) != len(labels):
        raise ValueError(f"{len(train)} descriptors but {len(labels)} labels")


def _check_dims(train, test):
    shape = np.shape(train[0])
    for t in test:
        if np.shape(t) != shape:
            raise SpdError(f"dimension mismatch: training {shape}, test {np.shape(t)}")


def pairwise_dist(train: Sequence, test: Sequence, metric: str = "LOGED") -> np.ndarray:
    """Distances ``d(train[i], test[j])`` as an ``(n_train, n_test)`` array."""
    metric = metric.upper()
    _check_dims(train, test)
    if metric == "LOGED":
        la = log_stack(train).reshape(len(train), -1)
        lb = log_stack(test).reshape(len(test), -1) if len(test) else np.zeros((0, la.shape[1]))
        diff = la[:, None, :] - lb[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if metric == "AIRM":
        test = [as_sym(t) for t in test]
        out = np.empty((len(train), len(test)))
        for i, a in enumerate(train):
            w = inv_sqrt_spd(a)
            for j, b in enumerate(test):
                m = w @ b @ w
                lam = np.linalg.eigvalsh(0.5 * (m + m.T))
                out[i, j] = math.sqrt(float(np.sum(np.log(lam) ** 2)))
        return out
    raise ValueError(f"unknown metric {metric!r}; expected AIRM or LOGED")


def nn_classify(train, labels, test, metric: str = "LOGED") -> list:
    """Label of the nearest training descriptor for each test descriptor."""
    _check_train(train, labels)
    if len(test) == 0:
        return []
    d = pairwise_dist(train, test, metric)
    return [labels[i] for i in np.argmin(d, axis=0)]


# ----------------------------------------------------------------------------
# CDL: Fisher LDA on log-vectors, nearest-centroid decision


@dataclass(frozen=True)
class CdlModel:
    mean: np.ndarray
    projection: np.ndarray
    classes: tuple
    class_centroids: np.ndarray
    ridge: float


def _orient(w: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(w), axis=0)
    s = np.sign(w[idx, np.arange(w.shape[1])])
    s[s == 0] = 1.0
    return w * s


def cdl_fit(train, labels, ridge: float = 1e-3) -> CdlModel:
    """Regularized Fisher LDA on ``logvec`` coordinates.

    The within-class scatter becomes ``S_w + ridge * tr(S_w) / dim * I``. The
    problem is solved in the span of the centred training vectors, which holds
    every discriminant direction with nonzero eigenvalue, so the cost stays
    bounded by the number of samples rather than ``n(n+1)/2``.
    """
    _check_train(train, labels)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("CDL needs at least two classes")
    x = logvec_from_log(log_stack(train))
    y = np.asarray([classes.index(l) for l in labels])
    dim = x.shape[1]
    mean = x.mean(axis=0)
    xc = x - mean
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    rank = int(np.count_nonzero(s > s[0] * max(xc.shape) * np.finfo(float).eps)) if s[0] > 0 else 0
    if rank == 0:
        raise ValueError("all training descriptors are identical")
    q = vt[:rank].T
    z = xc @ q
    sw = np.zeros((rank, rank))
    sb = np.zeros((rank, rank))
    for c in range(len(classes)):
        zc = z[y == c]
        mu = zc.mean(axis=0)
        dev = zc - mu
        sw += dev.T @ dev
        sb += len(zc) * np.outer(mu, mu)
    sw = 0.5 * (sw + sw.T)
    tr = float(np.trace(sw))
    # zero within-class scatter (point-mass classes) falls back to an absolute ridge
    reg = sw + (ridge * tr / dim if tr > 0 else ridge) * np.eye(rank)
    lam_min = np.linalg.eigvalsh(reg)[0]
    if not lam_min > 1e-12 * max(np.trace(reg), 1e-300):
        raise ValueError(
            "regularized within-class scatter is singular; use a larger ridge "
            f"(lambda_min = {lam_min:.3e})"
        )
    ncomp = min(len(classes) - 1, rank)
    w_all, v_all = scipy.linalg.eigh(sb, reg)
    w = _orient(v_all[:, ::-1][:, :ncomp])
    projection = q @ w
    proj = xc @ projection
    centroids = np.stack([proj[y == c].mean(axis=0) for c in range(len(classes))])
    return CdlModel(mean, projection, classes, centroids, ridge)


def cdl_predict(model: CdlModel, test) -> list:
    if len(test) == 0:
        return []
    x = logvec_from_log(log_stack(test))
    if x.shape[1] != model.mean.shape[0]:
        raise SpdError("dimension mismatch between CDL model and test descriptors")
    p = (x - model.mean) @ model.projection
    d = ((p[:, None, :] - model.class_centroids[None]) ** 2).sum(axis=2)
    return [model.classes[i] for i in np.argmin(d, axis=1)]


# ----------------------------------------------------------------------------
# LogEKSR: kernel sparse representation


class SparseCodingError(RuntimeError):
    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (duality gap estimate {gap:.3e})")
        self.gap = gap


@dataclass(frozen=True)
class SrcModel:
    spec: KernelSpec
    logs: np.ndarray
    gram: np.ndarray
    labels: tuple
    classes: tuple
    lam: float | None


def _objective(K, k, lam, x):
    return float(x @ K @ x - 2.0 * k @ x + lam * np.abs(x).sum())


def duality_gap(K, k, kyy, lam, x) -> float:
    """Gap between the lasso primal at ``x`` and a rescaled-residual dual point."""
    kx = K @ x
    g = k - kx
    rr = kyy - 2.0 * k @ x + x @ kx
    primal = rr + lam * np.abs(x).sum()
    gmax = np.abs(g).max() if g.size else 0.0
    s = 1.0 if gmax == 0 or lam == 0 else min(1.0, lam / (2.0 * gmax))
    dual = 2.0 * s * (kyy - k @ x) - s * s * rr
    return float(primal - dual)


def _polish(K, k, lam, x):
    """Feature-sign step: solve the stationarity system on the support of ``x``
    with its signs fixed, then search the segment towards that solution at the
    points where coefficients cross zero. Returns the best point found.
    """
    idx = np.flatnonzero(x)
    if idx.size == 0:
        return x
    s = np.sign(x[idx])
    sol, *_ = np.linalg.lstsq(K[np.ix_(idx, idx)], k[idx] - 0.5 * lam * s, rcond=None)
    target = np.zeros_like(x)
    target[idx] = sol
    d = target - x
    with np.errstate(divide="ignore", invalid="ignore"):
        ts = -x[idx] / d[idx]
    ts = ts[(ts > 0) & (ts < 1)]
    best, best_obj = x, _objective(K, k, lam, x)
    for t in np.append(ts, 1.0):
        cand = x + t * d
        if t < 1:
            # snap the coefficient that reaches zero at this t
            cand[idx[np.argmin(np.abs(cand[idx]))]] = 0.0
        obj = _objective(K, k, lam, cand)
        if obj < best_obj:
            best, best_obj = cand, obj
    return best


def sparse_code(
    K: np.ndarray,
    k: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
    kyy: float | None = None,
    history: list | None = None,
    polish_every: int = 20,
) -> np.ndarray:
    """Minimize ``x^T K x - 2 k^T x + lam ||x||_1`` by cyclic coordinate descent.

    Stops when no coefficient moves by more than ``tol`` in a sweep. Every
    ``polish_every`` sweeps a feature-sign step (exact solve on the current
    support and signs, with a line search over zero crossings) is tried and
    kept only if it lowers the objective. This rescues ill-conditioned Gram matrices where plain
    coordinate descent crawls. The objective after each sweep is appended to
    ``history`` when given.
    """
    K = np.asarray(K, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    n = k.shape[0]
    x = np.zeros(n)
    kx = np.zeros(n)
    diag = np.diag(K).copy()
    half = 0.5 * lam
    prev = 0.0
    for sweep in range(1, max_sweeps + 1):
        delta = 0.0
        for j in range(n):
            if diag[j] <= 0:
                new = 0.0
            else:
                rho = k[j] - (kx[j] - diag[j] * x[j])
                if rho > half:
                    new = (rho - half) / diag[j]
                elif rho < -half:
                    new = (rho + half) / diag[j]
                else:
                    new = 0.0
            step = new - x[j]
            if step != 0.0:
                kx += step * K[:, j]
                x[j] = new
                delta = max(delta, abs(step))
        obj = _objective(K, k, lam, x)
        if obj > prev + 1e-9 * max(1.0, abs(prev)):
            raise AssertionError(f"coordinate descent objective increased: {prev} -> {obj}")
        if delta >= tol and polish_every and sweep % polish_every == 0:
            cand = _polish(K, k, lam, x)
            cobj = _objective(K, k, lam, cand)
            if cobj < obj:
                x, obj = cand, cobj
                kx = K @ x
        prev = obj
        if history is not None:
            history.append(obj)
        if delta < tol:
            return x
    if kyy is None:
        # smallest k(y, y) consistent with the dictionary: ||P phi(y)||^2
        kyy = float(k @ np.linalg.lstsq(K, k, rcond=None)[0])
    raise SparseCodingError(
        f"coordinate descent did not converge in {max_sweeps} sweeps",
        duality_gap(K, k, kyy, lam, x),
    )


def src_fit(train, labels, spec: KernelSpec | None = None, lam: float | None = None) -> SrcModel:
    """Cache the dictionary logs and Gram matrix; ``lam=None`` means per-query default."""
    _check_train(train, labels)
    spec = spec or KernelSpec(KernelKind.LOGE_POLY)
    if not isinstance(spec, KernelSpec):
        raise ValueError(f"invalid kernel spec {spec!r}")
    if lam is not None and lam < 0:
        raise ValueError("lambda must be nonnegative")
    logs = log_stack(train)
    K = gram_from_logs(spec, logs)
    return SrcModel(spec, logs, K, tuple(labels), tuple(sorted(set(labels))), lam)


def src_residuals(model: SrcModel, y) -> tuple[np.ndarray, np.ndarray]:
    """Per-class reconstruction residuals and the sparse code for one query."""
    ly = log_spd(y)[None]
    if ly.shape[1:] != model.logs.shape[1:]:
        raise SpdError("dimension mismatch between dictionary and query")
    k = kernel_from_logs(model.spec, model.logs, ly)[:, 0]
    if model.spec.kind is KernelKind.LOGE_GAUSS:
        kyy = 1.0
    else:
        kyy = float(kernel_from_logs(model.spec, ly, ly)[0, 0])
    lam = model.lam if model.lam is not None else 1e-3 * float(np.abs(k).max())
    x = sparse_code(model.gram, k, lam, kyy=kyy)
    labels = np.asarray(model.labels, dtype=object)
    res = np.empty(len(model.classes))
    for ci, c in enumerate(model.classes):
        idx = np.flatnonzero(labels == c)
        xc = x[idx]
        res[ci] = kyy - 2.0 * k[idx] @ xc + xc @ model.gram[np.ix_(idx, idx)] @ xc
    return res, x


def src_predict(model: SrcModel, test) -> list:
    out = []
    for y in test:
        res, _ = src_residuals(model, y)
        out.append(model.classes[int(np.argmin(res))])
    return out
