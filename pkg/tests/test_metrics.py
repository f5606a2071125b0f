import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from invex.errors import InputError
from invex.metrics import ImageBuffer, add_awgn, experimental_snr, psnr, ssim
from invex.rng import make_rng


def test_psnr_examples():
    assert psnr(np.ones(100), np.full(100, 0.9)) == pytest.approx(20.0, abs=1e-12)
    assert psnr([1.0, 0.0], [0.5, 0.5]) == pytest.approx(6.020599913, abs=1e-9)
    assert psnr([0.2, 0.3], [0.2, 0.3]) == math.inf


def test_psnr_shape_mismatch():
    with pytest.raises(InputError):
        psnr(np.zeros(3), np.zeros(4))


def test_snr_examples():
    z = np.zeros(100)
    z[0] = 10.0
    zh = z.copy()
    zh[1] = 1.0
    assert experimental_snr(z, zh) == pytest.approx(20.0, abs=1e-12)
    e = np.array([0.6, 0.8])
    assert experimental_snr(e, 2 * e) == pytest.approx(0.0, abs=1e-12)
    assert experimental_snr([3, 4], [3, 4.5]) == pytest.approx(20.0, abs=1e-12)
    assert experimental_snr([3, 4], [3, 4]) == math.inf
    with pytest.raises(InputError):
        experimental_snr([0, 0], [1, 0])


def _pair(seed, shift=0.1, size=32):
    a = make_rng(seed).random((size, size))
    return a, a + shift


def test_ssim_identical_is_one():
    a, _ = _pair(0)
    assert ssim(a, a) == 1.0


def test_ssim_golden():
    a, b = _pair(0)
    v = ssim(a, b)
    assert 0 < v < 1
    assert v == pytest.approx(0.9836538643367195, abs=1e-12)


@given(st.integers(0, 2**32), st.floats(-0.5, 0.5))
def test_ssim_matches_reference(seed, shift):
    a, b = _pair(seed, shift, 24)
    ref = structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-12)


@given(st.integers(0, 2**32))
def test_ssim_symmetric_and_bounded(seed):
    rng = make_rng(seed)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12
    assert -1 <= ssim(a, b) <= 1


def test_ssim_too_small():
    with pytest.raises(InputError):
        ssim(np.zeros((10, 10)), np.zeros((10, 10)))


@given(st.integers(0, 2**32))
def test_psnr_symmetric(seed):
    rng = make_rng(seed)
    a, b = rng.random(50), rng.random(50)
    assert psnr(a, b) == psnr(b, a)


def test_awgn_inf_and_determinism():
    v = np.linspace(1, 2, 50)
    assert np.array_equal(add_awgn(v, math.inf, 0), v)
    assert np.array_equal(add_awgn(v, 20, 5), add_awgn(v, 20, 5))
    assert not np.array_equal(add_awgn(v, 20, 5), add_awgn(v, 20, 6))
    with pytest.raises(InputError):
        add_awgn(np.zeros(5), 10, 0)


@pytest.mark.parametrize("snr", [0.0, 20.0, 30.0])
def test_awgn_realized_snr(snr):
    v = make_rng(99).random(10_000) + 0.5
    for seed in range(20):
        n = add_awgn(v, snr, seed) - v
        realized = 20 * math.log10(np.linalg.norm(v) / np.linalg.norm(n))
        assert abs(realized - snr) <= 0.5


def test_image_buffer():
    img = ImageBuffer.from_array(np.arange(6.0).reshape(2, 3) / 5)
    assert (img.width, img.height) == (3, 2)
    assert img.array[1, 2] == 1.0
    assert np.asarray(img).shape == (2, 3)
    assert ImageBuffer(1, 2, [-1, 2]).clamped().pixels.tolist() == [0.0, 1.0]
    with pytest.raises(InputError):
        ImageBuffer(2, 2, np.zeros(3))
