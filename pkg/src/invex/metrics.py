"""Image quality metrics and noise injection.

Images are real arrays scaled to [0, 1]; PSNR uses a peak of 1.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate2d

from .errors import InputError, ParameterError
from .rng import gaussian, make_rng

__all__ = [
    "ImageBuffer",
    "psnr",
    "experimental_snr",
    "ssim",
    "add_awgn",
    "PSNR_CAP_DB",
]

PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass
class ImageBuffer:
    """Grayscale image stored row-major as a flat vector."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float).ravel()
        if self.pixels.size != self.width * self.height:
            raise InputError(
                f"{self.pixels.size} pixels do not fill a {self.width}x{self.height} image")

    @classmethod
    def from_array(cls, arr) -> "ImageBuffer":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2:
            raise InputError("an image must be a 2-D array")
        return cls(arr.shape[1], arr.shape[0], arr.ravel())

    @property
    def array(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width)

    def clamped(self) -> "ImageBuffer":
        return ImageBuffer(self.width, self.height, np.clip(self.pixels, 0.0, 1.0))

    def __array__(self, dtype=None, copy=None):
        return self.array if dtype is None else self.array.astype(dtype)


def _pair(ref, est):
    a = np.asarray(ref, dtype=float)
    b = np.asarray(est, dtype=float)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr(ref, est) -> float:
    """PSNR in dB with peak 1.0; ``inf`` for identical inputs."""
    a, b = _pair(ref, est)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def experimental_snr(z, zhat) -> float:
    """``20 log10(||z|| / ||zhat - z||)`` in dB; ``inf`` when ``zhat == z``."""
    a, b = _pair(z, zhat)
    signal = float(np.linalg.norm(a))
    if signal == 0.0:
        raise InputError("reference signal has zero norm")
    err = float(np.linalg.norm(b - a))
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(signal / err)


def _ssim_window():
    r = np.arange(SSIM_WINDOW) - SSIM_WINDOW // 2
    g = np.exp(-(r ** 2) / (2.0 * SSIM_SIGMA ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(ref, est) -> float:
    """Mean SSIM over all fully-covered 11x11 Gaussian windows (sigma 1.5).

    Dynamic range 1.0, ``C1 = 0.01**2``, ``C2 = 0.03**2``, population
    (un-normalized) local moments.
    """
    a, b = _pair(ref, est)
    if a.ndim != 2:
        raise InputError("ssim needs 2-D images")
    if min(a.shape) < SSIM_WINDOW:
        raise InputError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    w = _ssim_window()

    def filt(x):
        return correlate2d(x, w, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def add_awgn(v, snr_db: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise so the expected SNR is ``snr_db``.

    The noise variance is ``||v||**2 / (len(v) * 10**(snr_db / 10))``;
    ``snr_db = inf`` returns a copy of ``v``.
    """
    v = np.asarray(v, dtype=float)
    snr_db = float(snr_db)
    if math.isinf(snr_db) and snr_db > 0:
        return v.copy()
    if not math.isfinite(snr_db):
        raise ParameterError(f"snr_db must be finite or +inf, got {snr_db}")
    power = float(v.ravel() @ v.ravel())
    if power == 0.0:
        raise InputError("cannot set an SNR for a zero-norm signal")
    sigma = math.sqrt(power / (v.size * 10.0 ** (snr_db / 10.0)))
    return v + gaussian(make_rng(seed), v.shape, scale=sigma)
