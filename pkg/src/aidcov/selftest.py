"""Quick invariant checks run by ``aidcov selftest``."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .classifiers import logvec
from .evaluation import make_rng
from .metrics import KernelKind, KernelSpec, airm_dist, gram, lem_dist, log_stack, loge_inner
from .nystrom import nystrom_batch_embed, nystrom_fit
from .pipeline import aid_covd_from_logs
from .spd import exp_sym, log_spd


def random_spd(rng: np.random.Generator, n: int, spread: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) * spread
    return exp_sym(0.5 * (a + a.T))


def _roundtrip(rng) -> bool:
    for _ in range(20):
        a = random_spd(rng, int(rng.integers(2, 8)))
        back = exp_sym(log_spd(a))
        if np.linalg.norm(back - a) > 1e-9 * np.linalg.norm(a):
            return False
    return True


def _metric_axioms(rng) -> bool:
    for _ in range(20):
        n = int(rng.integers(2, 6))
        a, b, c = (random_spd(rng, n) for _ in range(3))
        for d in (airm_dist, lem_dist):
            if abs(d(a, b) - d(b, a)) > 1e-8 or d(a, a) > 1e-8:
                return False
            if d(a, c) > d(a, b) + d(b, c) + 1e-8:
                return False
    return True


def _gram_psd(rng) -> bool:
    specs = [
        KernelSpec(KernelKind.LOGE_LINEAR),
        KernelSpec(KernelKind.LOGE_POLY),
        KernelSpec(KernelKind.LOGE_EXP, coeffs=(0.0, 0.1)),
        KernelSpec(KernelKind.LOGE_GAUSS, bandwidth=0.5),
    ]
    mats = [random_spd(rng, 3, 0.5) for _ in range(12)]
    for spec in specs:
        w = np.linalg.eigvalsh(gram(spec, mats))
        if w[0] < -1e-8 * w[-1]:
            return False
    return True


def _nystrom_exact(rng) -> bool:
    mats = [random_spd(rng, 4) for _ in range(8)]
    spec = KernelSpec(KernelKind.LOGE_LINEAR)
    model = nystrom_fit(mats, spec, 8)
    z = nystrom_batch_embed(model, mats)
    k = gram(spec, mats)
    return bool(np.linalg.norm(z.T @ z - k) <= 1e-8 * np.linalg.norm(k))


def _aid_algebra(rng) -> bool:
    mats = [random_spd(rng, 3) for _ in range(12)]
    model = nystrom_fit(mats, KernelSpec(KernelKind.LOGE_LINEAR), 5)
    sub = mats[:7]
    c = aid_covd_from_logs(model, log_stack(sub), eps=0.0)
    z = nystrom_batch_embed(model, sub)
    dev = z - z.mean(axis=1, keepdims=True)
    oracle = sum(np.outer(dev[:, i], dev[:, i]) for i in range(z.shape[1])) / z.shape[1]
    return bool(np.allclose(c, oracle, atol=1e-12, rtol=0))


def _logvec_isometry(rng) -> bool:
    for _ in range(10):
        n = int(rng.integers(2, 6))
        a, b = random_spd(rng, n), random_spd(rng, n)
        if abs(logvec(a) @ logvec(b) - loge_inner(a, b)) > 1e-10:
            return False
    return True


CHECKS: dict[str, Callable[[np.random.Generator], bool]] = {
    "log/exp roundtrip": _roundtrip,
    "metric axioms (AIRM, LEM)": _metric_axioms,
    "Gram PSD for all kernel kinds": _gram_psd,
    "Nystrom exactness at D = M": _nystrom_exact,
    "set covariance over embeddings": _aid_algebra,
    "logvec isometry": _logvec_isometry,
}


def run_selftest(seed: int = 0, echo: Callable[[str], None] = print) -> bool:
    ok = True
    for i, (name, check) in enumerate(CHECKS.items()):
        try:
            passed = check(make_rng(seed, i))
        except Exception as exc:  # noqa: BLE001 - a crash counts as a failure
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    return ok
