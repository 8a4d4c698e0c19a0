import numpy as np
import pytest

from aidcov.features import FeatureError, centered_covariance, FeatureKind, FeatureSpec, ImageSet, traditional_set_covd
from aidcov.metrics import KernelKind, KernelSpec, log_stack
from aidcov.nystrom import nystrom_batch_embed, nystrom_fit
from aidcov.pipeline import (
    DescriptorCache,
    Method,
    aid_covd,
    aid_covd_from_logs,
    config_hash,
    image_covds,
    traditional_covd,
)
from aidcov.spd import SpdError

from conftest import random_spd

LIN = KernelSpec(KernelKind.LOGE_LINEAR)
GAUSS = KernelSpec(KernelKind.LOGE_GAUSS, bandwidth=0.2)
GABOR = FeatureSpec(kind=FeatureKind.GABOR)
GRAD = FeatureSpec(kind=FeatureKind.GRADIENT)


@pytest.fixture
def images(rng):
    return [rng.uniform(size=(16, 16)) for _ in range(12)]


@pytest.fixture
def grad_model(images):
    return nystrom_fit(image_covds(images, GRAD), GAUSS, 6)


def test_image_covds_shapes(images):
    covds = image_covds(images[:3], GABOR)
    assert len(covds) == 3 and all(c.shape == (40, 40) for c in covds)
    assert image_covds(images[:2])[0].shape == (45, 45)


def test_identical_images_give_identical_covds(rng):
    img = rng.uniform(size=(16, 16))
    covds = image_covds([img] * 4, GRAD)
    for c in covds[1:]:
        np.testing.assert_array_equal(c, covds[0])


def test_forty_one_images(rng):
    imgs = [rng.uniform(size=(10, 10)) for _ in range(41)]
    assert len(image_covds(imgs, GRAD)) == 41


def test_image_covds_parallel_matches_serial(images):
    a = image_covds(images, GRAD, jobs=1)
    b = image_covds(images, GRAD, jobs=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_singleton_set(grad_model, images):
    d = aid_covd(ImageSet("a", images[:1]), grad_model, GRAD, eps=1e-3)
    np.testing.assert_array_equal(d.matrix, 1e-3 * np.eye(6))
    assert d.label == "a" and d.method is Method.AID


def test_identical_images_give_zero_covariance(grad_model, images):
    d = aid_covd([images[0]] * 5, grad_model, GRAD, eps=1e-3)
    np.testing.assert_array_equal(d.matrix, 1e-3 * np.eye(6))


def test_forty_dimensional_descriptor(rng):
    covds = [random_spd(rng, 5) for _ in range(60)]
    model = nystrom_fit(covds, GAUSS, 40)
    d = aid_covd(None, model, covds=covds[:15], label="x")
    assert d.matrix.shape == (40, 40)


def test_matches_direct_covariance_oracle(rng):
    covds = [random_spd(rng, 4) for _ in range(20)]
    model = nystrom_fit(covds, LIN, 5)
    sub = [random_spd(rng, 4) for _ in range(10)]
    c = aid_covd_from_logs(model, log_stack(sub), eps=0.0)
    z = nystrom_batch_embed(model, sub)
    zbar = z.mean(axis=1)
    oracle = sum(np.outer(z[:, i] - zbar, z[:, i] - zbar) for i in range(10)) / 10
    np.testing.assert_allclose(c, oracle, atol=1e-12, rtol=0)


def test_order_invariance(rng):
    covds = [random_spd(rng, 4) for _ in range(20)]
    model = nystrom_fit(covds, GAUSS, 8)
    sub = [random_spd(rng, 4) for _ in range(9)]
    a = aid_covd(None, model, covds=sub).matrix
    b = aid_covd(None, model, covds=sub[::-1]).matrix
    np.testing.assert_allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 5, 12])
def test_rank_bound(rng, n):
    covds = [random_spd(rng, 4) for _ in range(20)]
    model = nystrom_fit(covds, GAUSS, 8)
    z = nystrom_batch_embed(model, [random_spd(rng, 4) for _ in range(n)])
    w = np.linalg.eigvalsh(centered_covariance(z))
    assert np.count_nonzero(w > 1e-10 * w[-1]) <= min(8, n - 1)


def test_decoupled_from_resolution(rng, grad_model):
    small = [rng.uniform(size=(12, 12)) for _ in range(4)]
    large = [rng.uniform(size=(64, 48)) for _ in range(4)]
    assert aid_covd(small, grad_model, GRAD).matrix.shape == aid_covd(large, grad_model, GRAD).matrix.shape


def test_errors(grad_model, images):
    with pytest.raises(FeatureError):
        aid_covd([], grad_model, GRAD)
    with pytest.raises(SpdError):
        aid_covd(images[:3], grad_model, GABOR)


def test_traditional_delegation(images):
    d = traditional_covd(ImageSet("c", images), (20, 20), 1e-3)
    assert d.matrix.shape == (400, 400) and d.method is Method.TRADITIONAL and d.label == "c"
    np.testing.assert_array_equal(d.matrix, traditional_set_covd(images, (20, 20), 1e-3))


def test_traditional_singleton(images):
    np.testing.assert_array_equal(traditional_covd(images[:1], (8, 8)).matrix, 1e-3 * np.eye(64))


def test_config_hash_stable():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16


def test_descriptor_cache(tmp_path, rng):
    cache = DescriptorCache(tmp_path)
    calls = []
    arr = rng.normal(size=(3, 3))

    def compute():
        calls.append(1)
        return arr

    a = cache.get_or_compute("ds", "cls/set1", "traditional", "abc", compute, {"eps": 1e-3})
    b = cache.get_or_compute("ds", "cls/set1", "traditional", "abc", compute)
    assert len(calls) == 1 and cache.hits == 1 and cache.misses == 1
    np.testing.assert_array_equal(a, b)
    cache.get_or_compute("ds", "cls/set1", "traditional", "other", compute)
    assert len(calls) == 2
    sidecars = list(tmp_path.rglob("*.json"))
    assert len(sidecars) == 2
    assert '"eps"' in sidecars[0].read_text() or '"eps"' in sidecars[1].read_text()
