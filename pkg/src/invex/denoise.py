"""Patch-based denoising with a data-adaptive orthogonal frame.

The frame ``W`` is learned from random mean-removed patches of the noisy
image by alternating coefficient thresholding and an orthogonal Procrustes
update ``W <- U V^T``. Denoising transforms every patch with ``W``, applies
the regularizer's prox, maps back with ``W^T`` and averages overlaps.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError, ParameterError
from .metrics import ImageBuffer
from .prox import prox_vector
from .regularizers import Regularizer
from .rng import make_rng

__all__ = [
    "FrameLearnConfig",
    "TightFrame",
    "extract_patches",
    "learn_tight_frame",
    "denoise_image",
    "initial_frame",
]

logger = logging.getLogger(__name__)

THRESHOLD_MODES = ("as-written", "conventional")


@dataclass
class FrameLearnConfig:
    S: int = 2048
    K: int = 10
    lambda1: float = 0.1
    lambda2: float = 0.015
    patch: int = 16
    seed: int = 0
    stride: int = 8
    # "as-written" keeps coefficients with |c| <= lambda1 during learning;
    # "conventional" keeps |c| > lambda1
    threshold_mode: str = "as-written"

    def __post_init__(self):
        if self.patch < 1:
            raise ParameterError("patch size must be positive")
        if self.S < self.patch * self.patch:
            raise ParameterError(
                f"S={self.S} patches cannot span a {self.patch * self.patch}-dim frame")
        if self.K < 0:
            raise ParameterError("K must be non-negative")
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")
        if self.stride < 1:
            raise ParameterError("stride must be positive")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ParameterError(f"threshold_mode must be one of {THRESHOLD_MODES}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TightFrame:
    W: np.ndarray
    threshold_mode: str = "as-written"
    rank_deficient_steps: int = 0

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.W.T @ self.W - np.eye(self.dim))))


def _as_array(img):
    if isinstance(img, ImageBuffer):
        return img.array
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise InputError("expected a 2-D image")
    return arr


def extract_patches(img, S: int, patch: int = 16, seed: int = 0,
                    return_positions: bool = False):
    """``patch**2 x S`` matrix of mean-removed patches at random positions.

    Top-left corners are uniform on ``[0, H - patch] x [0, W - patch]``.
    Each column is one patch flattened row-major.
    """
    arr = _as_array(img)
    h, w = arr.shape
    if h < patch or w < patch:
        raise InputError(f"a {w}x{h} image is smaller than the {patch}x{patch} patch")
    rng = make_rng(seed)
    rows = rng.integers(0, h - patch + 1, size=S)
    cols = rng.integers(0, w - patch + 1, size=S)
    windows = sliding_window_view(arr, (patch, patch))
    P = windows[rows, cols].reshape(S, patch * patch).T.copy()
    P -= P.mean(axis=0, keepdims=True)
    if return_positions:
        return P, np.column_stack([rows, cols])
    return P


def initial_frame(dim: int) -> np.ndarray:
    return np.full((dim, dim), 1.0 / dim)


def _threshold(C, lambda1, mode):
    keep = np.abs(C) <= lambda1 if mode == "as-written" else np.abs(C) > lambda1
    return np.where(keep, C, 0.0)


def learn_tight_frame(P, cfg: FrameLearnConfig) -> TightFrame:
    """Run ``cfg.K`` thresholding / Procrustes rounds on the patch matrix ``P``.

    Starts from the constant matrix ``1/d``. The residual
    ``A = (I - W0 W0^T) P`` is formed once; each round computes
    coefficients ``C = W^T P``, thresholds them, and sets ``W = U V^T`` from
    the SVD of ``A C_hat^T``.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2:
        raise InputError("P must be a 2-D matrix")
    d = P.shape[0]
    W = initial_frame(d)
    A = P - W @ (W.T @ P)
    deficient = 0
    for _ in range(cfg.K):
        C = W.T @ P
        M = A @ _threshold(C, cfg.lambda1, cfg.threshold_mode).T
        U, sv, Vt = np.linalg.svd(M)
        # the polar factor is not unique when M is singular; numpy completes
        # the missing singular vectors with an orthonormal basis
        if sv[0] == 0.0 or sv[-1] <= sv[0] * d * np.finfo(float).eps:
            deficient += 1
        W = U @ Vt
    if deficient:
        logger.warning("frame update was rank deficient in %d of %d rounds; "
                       "singular vectors were completed orthonormally", deficient, cfg.K)
    return TightFrame(W, cfg.threshold_mode, deficient)


def _positions(n, patch, stride):
    pos = list(range(0, n - patch + 1, stride))
    if pos[-1] != n - patch:
        pos.append(n - patch)
    return np.array(pos)


def denoise_patches(arr, frame: TightFrame, reg: Regularizer, lambda2: float,
                    patch: int, stride: int) -> np.ndarray:
    """Shrink every sliding patch in the frame domain and average overlaps."""
    h, w = arr.shape
    rows, cols = _positions(h, patch, stride), _positions(w, patch, stride)
    windows = sliding_window_view(arr, (patch, patch))
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    X = windows[rr.ravel(), cc.ravel()].reshape(-1, patch * patch).T
    means = X.mean(axis=0, keepdims=True)
    W = frame.W
    coeffs = prox_vector(reg, lambda2, W @ (X - means))
    Xhat = W.T @ coeffs + means

    acc = np.zeros_like(arr)
    cnt = np.zeros_like(arr)
    # sequential scatter-add keeps the accumulation order fixed
    for k, (r, c) in enumerate(zip(rr.ravel(), cc.ravel())):
        acc[r:r + patch, c:c + patch] += Xhat[:, k].reshape(patch, patch)
        cnt[r:r + patch, c:c + patch] += 1.0
    return acc / cnt


def denoise_image(img, reg: Regularizer, cfg: FrameLearnConfig | None = None,
                  frame: TightFrame | None = None) -> ImageBuffer:
    """Learn a frame from ``img`` (unless given) and denoise it patch-wise.

    The output is clamped to [0, 1].
    """
    cfg = cfg or FrameLearnConfig()
    arr = _as_array(img)
    if frame is None:
        P = extract_patches(arr, cfg.S, cfg.patch, cfg.seed)
        frame = learn_tight_frame(P, cfg)
    out = denoise_patches(arr, frame, reg, cfg.lambda2, cfg.patch, cfg.stride)
    return ImageBuffer.from_array(np.clip(out, 0.0, 1.0))
