"""Both kernel paths (numba and numpy) must agree to roundoff."""
import numpy as np
import pytest

from avsm import kernels


@pytest.fixture(scope="module")
def img(rng):
    return rng.uniform(0.0, 1.0, (61, 83))


def test_resize_paths_agree(img):
    for shape in ((61, 83), (30, 41), (13, 17), (122, 166), (200, 50)):
        a = kernels._resize_bilinear_np(img, *shape)
        b = kernels._resize_bilinear_nb(img, *shape)
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_resize_constant_preserved(img):
    const = np.full((40, 50), 0.37)
    out = kernels.resize_bilinear(const, (17, 90))
    np.testing.assert_allclose(out, 0.37, atol=1e-12)


def test_resize_identity(img):
    np.testing.assert_array_equal(kernels.resize_bilinear(img, img.shape), img)


def test_sample_paths_agree(img, rng):
    xq = rng.uniform(-3, 90, (25, 25))
    yq = rng.uniform(-3, 70, (25, 25))
    np.testing.assert_allclose(kernels._sample_bilinear_np(img, xq, yq),
                               kernels._sample_bilinear_nb(img, xq, yq),
                               atol=1e-12)
    np.testing.assert_allclose(kernels._sample_wrap_np(img, xq, yq),
                               kernels._sample_wrap_nb(img, xq, yq),
                               atol=1e-12)


def test_wrap_sampling_is_cyclic(img):
    w = img.shape[1]
    xq = np.array([[0.25, 0.25 + w, 0.25 + 3 * w]])
    yq = np.full_like(xq, 10.3)
    vals = kernels.sample_wrap_bilinear(img, xq, yq)
    np.testing.assert_allclose(vals, vals[0, 0], atol=1e-12)


def test_translate_shifts_content():
    m = np.zeros((11, 11))
    m[5, 5] = 1.0
    out = kernels.translate_bilinear(m, 2.0, -1.0)
    assert out[4, 7] == pytest.approx(1.0)


def test_translate_fractional():
    m = np.zeros((11, 11))
    m[5, 5] = 1.0
    out = kernels.translate_bilinear(m, 0.5, 0.0)
    assert out[5, 5] == pytest.approx(0.5)
    assert out[5, 6] == pytest.approx(0.5)


def test_hs_iterate_paths_agree(rng):
    shape = (31, 47)
    fx = rng.normal(0, 0.3, shape)
    fy = rng.normal(0, 0.3, shape)
    ft = rng.normal(0, 0.1, shape)
    z = np.zeros(shape)
    u1, v1 = kernels._hs_iterate_np(z, z, fx, fy, ft, 0.25, 40)
    u2, v2 = kernels._hs_iterate_nb(z.copy(), z.copy(), fx, fy, ft, 0.25, 40)
    np.testing.assert_allclose(u1, u2, atol=1e-10)
    np.testing.assert_allclose(v1, v2, atol=1e-10)


def test_warp_identity(img):
    z = np.zeros_like(img)
    np.testing.assert_allclose(kernels.warp_bilinear(img, z, z), img, atol=1e-12)
