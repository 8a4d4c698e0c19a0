import warnings

import numpy as np
import pytest

from aidcov.metrics import KernelKind, KernelSpec, gram, kernel_eval
from aidcov.nystrom import (
    DegenerateKernelError,
    load_model,
    nystrom_batch_embed,
    nystrom_embed,
    nystrom_fit,
    save_model,
)
from aidcov.spd import SpdError

from conftest import random_spd

LIN = KernelSpec(KernelKind.LOGE_LINEAR)
GAUSS = KernelSpec(KernelKind.LOGE_GAUSS, bandwidth=0.3)
POLY = KernelSpec(KernelKind.LOGE_POLY)


def spd_set(rng, m, n=4):
    return [random_spd(rng, n) for _ in range(m)]


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_identical_matrices_collapse(rng):
    a = random_spd(rng, 3)
    with pytest.warns(RuntimeWarning, match="reduced"):
        model = nystrom_fit([a] * 6, LIN, 4)
    assert model.dim == 1 and model.requested_dim == 4
    assert model.notes and "reduced" in model.notes[0]


def test_degenerate_kernel():
    # identity has a zero log, so the linear kernel is identically zero
    with pytest.raises(DegenerateKernelError):
        nystrom_fit([np.eye(3)] * 4, LIN, 2)


def test_invalid_dim(rng):
    mats = spd_set(rng, 5)
    for d in (0, 6):
        with pytest.raises(ValueError):
            nystrom_fit(mats, LIN, d)


@pytest.mark.parametrize("spec", [LIN, POLY, GAUSS])
def test_exact_at_full_dim(rng, spec):
    mats = spd_set(rng, 8)  # 8 <= 10 = dim of 4x4 symmetric space, so the linear Gram is full rank
    k = gram(spec, mats)
    model = nystrom_fit(mats, spec, 8)
    assert model.dim == 8
    z = model.landmark_features()
    assert rel_err(z.T @ z, k) <= 1e-8
    emb = nystrom_batch_embed(model, mats)
    np.testing.assert_allclose(emb, z, atol=1e-8 * np.abs(z).max())
    assert rel_err(emb.T @ emb, k) <= 1e-8


def test_orthonormal_eigvecs(rng):
    model = nystrom_fit(spd_set(rng, 15), GAUSS, 9)
    np.testing.assert_allclose(model.eigvecs.T @ model.eigvecs, np.eye(9), atol=1e-8)
    assert np.all(np.diff(model.eigvals) <= 0)


def test_error_nonincreasing_and_eckart_young(rng):
    mats = spd_set(rng, 20, n=6)
    k = gram(LIN, mats)
    full = np.sort(np.linalg.eigvalsh(k))[::-1]
    errs = []
    for d in range(1, 21):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = nystrom_fit(mats, LIN, d)
        z = model.landmark_features()
        err = np.linalg.norm(z.T @ z - k)
        errs.append(err)
        tail = np.linalg.norm(full[model.dim :])
        assert err == pytest.approx(tail, abs=1e-8 * np.linalg.norm(k))
    assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


def test_gauss_norm_bound(rng):
    model = nystrom_fit(spd_set(rng, 12), GAUSS, 12)
    for y in spd_set(rng, 20):
        z = nystrom_embed(model, y)
        assert z @ z <= 1.0 + 1e-6


def test_batch_matches_loop(rng):
    model = nystrom_fit(spd_set(rng, 10), POLY, 6)
    ys = spd_set(rng, 7)
    batch = nystrom_batch_embed(model, ys)
    loop = np.stack([nystrom_embed(model, y) for y in ys], axis=1)
    np.testing.assert_allclose(batch, loop, atol=1e-12, rtol=0)
    assert nystrom_batch_embed(model, []).shape == (6, 0)
    np.testing.assert_allclose(nystrom_batch_embed(model, ys[:1])[:, 0], loop[:, 0], atol=1e-12)


def test_dimension_mismatch(rng):
    model = nystrom_fit(spd_set(rng, 5), LIN, 3)
    with pytest.raises(SpdError):
        nystrom_embed(model, np.eye(3))
    with pytest.raises(SpdError):
        nystrom_batch_embed(model, [np.eye(5)])


def test_determinism_and_sign_convention(rng):
    mats = spd_set(rng, 12)
    a = nystrom_fit(mats, GAUSS, 6)
    b = nystrom_fit(list(mats), GAUSS, 6)
    np.testing.assert_array_equal(a.eigvecs, b.eigvecs)
    np.testing.assert_array_equal(a.eigvals, b.eigvals)
    idx = np.argmax(np.abs(a.eigvecs), axis=0)
    assert np.all(a.eigvecs[idx, np.arange(6)] > 0)


def test_save_load_roundtrip(tmp_path, rng):
    model = nystrom_fit(spd_set(rng, 9), KernelSpec(KernelKind.LOGE_EXP, coeffs=(0.0, 0.2)), 5)
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.spec == model.spec and back.dim == 5
    ys = spd_set(rng, 4)
    np.testing.assert_array_equal(nystrom_batch_embed(back, ys), nystrom_batch_embed(model, ys))


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"magic": "something-else", "version": 1}')
    with pytest.raises(ValueError):
        load_model(path)


def test_kernel_fidelity_improves_with_dim():
    rng = np.random.default_rng(7)
    landmarks = [random_spd(rng, 5, spread=0.5) for _ in range(20)]
    probes = [random_spd(rng, 5, spread=0.5) for _ in range(10)]
    exact = np.array([[kernel_eval(GAUSS, a, b) for b in probes] for a in probes])
    errs = []
    for d in (1, 2, 4, 8, 12, 16, 20):
        model = nystrom_fit(landmarks, GAUSS, d)
        z = nystrom_batch_embed(model, probes)
        errs.append(np.mean(np.abs(z.T @ z - exact)))
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:])), errs
