"""Matrix-free and dense linear operators over flat real vectors."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .rng import gaussian, make_rng

__all__ = [
    "LinearOperator",
    "identity",
    "from_matrix",
    "make_gaussian_blur",
    "gaussian_kernel",
    "make_haar",
    "haar_analysis",
    "haar_synthesis",
    "make_gaussian_sensing",
    "compose",
    "estimate_lipschitz",
    "adjoint_mismatch",
    "save_matrix_csv",
    "load_matrix_csv",
]


@dataclass(frozen=True)
class LinearOperator:
    """A forward/adjoint pair mapping R^in_dim -> R^out_dim."""

    in_dim: int
    out_dim: int
    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    name: str = "linop"
    matrix: np.ndarray | None = None

    def __matmul__(self, x):
        return self.forward(np.asarray(x, dtype=float))

    @property
    def T(self) -> "LinearOperator":
        return LinearOperator(self.out_dim, self.in_dim, self.adjoint, self.forward,
                              f"{self.name}^T",
                              None if self.matrix is None else self.matrix.T)

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        eye = np.eye(self.in_dim)
        return np.column_stack([self.forward(e) for e in eye])


def identity(n: int) -> LinearOperator:
    return LinearOperator(n, n, lambda x: np.array(x, dtype=float),
                          lambda y: np.array(y, dtype=float), "identity")


def from_matrix(A, name: str = "matrix") -> LinearOperator:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ParameterError("a dense operator needs a 2-D matrix")
    return LinearOperator(A.shape[1], A.shape[0], lambda x: A @ x,
                          lambda y: A.T @ y, name, A)


def gaussian_kernel(ksize: int, sigma: float) -> np.ndarray:
    """Normalized ``ksize x ksize`` Gaussian kernel."""
    if ksize < 1 or ksize % 2 == 0:
        raise ParameterError(f"kernel size must be a positive odd integer, got {ksize}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    r = np.arange(ksize) - ksize // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def make_gaussian_blur(width: int, height: int, ksize: int = 9,
                       sigma: float = 4.0) -> LinearOperator:
    """Periodic 2-D convolution with a normalized Gaussian kernel."""
    kernel = gaussian_kernel(ksize, sigma)
    shape = (height, width)

    def forward(x):
        return ndimage.convolve(np.reshape(x, shape), kernel, mode="wrap").ravel()

    def adjoint(y):
        return ndimage.correlate(np.reshape(y, shape), kernel, mode="wrap").ravel()

    n = width * height
    return LinearOperator(n, n, forward, adjoint, f"blur{ksize}x{ksize}s{sigma:g}")


_S = 1.0 / math.sqrt(2.0)


def haar_analysis(img: np.ndarray, levels: int) -> np.ndarray:
    """Orthonormal 2-D Haar analysis, coefficients laid out in quadrants.

    Each level transforms rows then columns of the current approximation
    block and recurses on its top-left quarter.
    """
    c = np.array(img, dtype=float)
    h, w = c.shape
    for _ in range(levels):
        blk = c[:h, :w]
        blk = np.hstack([(blk[:, 0::2] + blk[:, 1::2]) * _S,
                         (blk[:, 0::2] - blk[:, 1::2]) * _S])
        blk = np.vstack([(blk[0::2] + blk[1::2]) * _S,
                         (blk[0::2] - blk[1::2]) * _S])
        c[:h, :w] = blk
        h //= 2
        w //= 2
    return c


def haar_synthesis(coeffs: np.ndarray, levels: int) -> np.ndarray:
    """Inverse of :func:`haar_analysis`."""
    c = np.array(coeffs, dtype=float)
    H, W = c.shape
    for lev in range(levels - 1, -1, -1):
        h, w = H >> lev, W >> lev
        blk = c[:h, :w]
        a, d = blk[: h // 2], blk[h // 2:]
        tmp = np.empty_like(blk)
        tmp[0::2] = (a + d) * _S
        tmp[1::2] = (a - d) * _S
        a, d = tmp[:, : w // 2], tmp[:, w // 2:]
        blk = np.empty_like(tmp)
        blk[:, 0::2] = (a + d) * _S
        blk[:, 1::2] = (a - d) * _S
        c[:h, :w] = blk
    return c


def make_haar(levels: int, width: int, height: int) -> LinearOperator:
    """Haar synthesis (coefficients -> image); the adjoint is the analysis."""
    if levels < 0:
        raise ParameterError("levels must be non-negative")
    step = 1 << levels
    if width % step or height % step:
        raise ParameterError(
            f"{width}x{height} is not divisible by 2**{levels} = {step}")
    shape = (height, width)

    def forward(x):
        return haar_synthesis(np.reshape(x, shape), levels).ravel()

    def adjoint(y):
        return haar_analysis(np.reshape(y, shape), levels).ravel()

    n = width * height
    return LinearOperator(n, n, forward, adjoint, f"haar{levels}")


def make_gaussian_sensing(m: int, n: int, seed: int) -> LinearOperator:
    """Dense ``m x n`` matrix with N(0, 1/m) entries and unit-norm columns."""
    if not 0 < m < n:
        raise ParameterError(f"sensing matrix needs 0 < m < n, got m={m}, n={n}")
    A = gaussian(make_rng(seed), (m, n), scale=1.0 / math.sqrt(m))
    A /= np.linalg.norm(A, axis=0)
    return from_matrix(A, f"gauss{m}x{n}")


def compose(outer: LinearOperator, inner: LinearOperator) -> LinearOperator:
    """``outer @ inner``."""
    if outer.in_dim != inner.out_dim:
        raise ParameterError(
            f"cannot compose {outer.name} (in {outer.in_dim}) with "
            f"{inner.name} (out {inner.out_dim})")
    matrix = None
    if outer.matrix is not None and inner.matrix is not None:
        matrix = outer.matrix @ inner.matrix
    return LinearOperator(
        inner.in_dim, outer.out_dim,
        lambda x: outer.forward(inner.forward(x)),
        lambda y: inner.adjoint(outer.adjoint(y)),
        f"{outer.name}*{inner.name}", matrix)


def estimate_lipschitz(H: LinearOperator, iters: int = 500, tol: float = 1e-10,
                       seed: int = 0, history: list | None = None) -> float:
    """Largest eigenvalue of H^T H by power iteration.

    Returns the Rayleigh quotient once its relative change drops below
    ``tol`` or after ``iters`` steps. Quotients are appended to ``history``
    when given.
    """
    if iters < 1:
        raise ParameterError("iters must be >= 1")
    x = gaussian(make_rng(seed), (H.in_dim,))
    x /= np.linalg.norm(x)
    rq = 0.0
    for _ in range(iters):
        y = H.adjoint(H.forward(x))
        new = float(x @ y)
        if history is not None:
            history.append(new)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(new - rq) <= tol * abs(new):
            return new
        rq = new
    return rq


def adjoint_mismatch(H: LinearOperator, seed: int = 0, trials: int = 3) -> float:
    """Worst ``|<Hx, y> - <x, H^T y>| / (|x||y|)`` over random pairs."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = gaussian(rng, (H.in_dim,))
        y = gaussian(rng, (H.out_dim,))
        lhs = float(H.forward(x) @ y)
        rhs = float(x @ H.adjoint(y))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(x) * np.linalg.norm(y)))
    return worst


def save_matrix_csv(path, A) -> None:
    """Write a dense matrix row-major as decimal CSV."""
    A = np.asarray(A, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in A:
            writer.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.array(rows, dtype=float)
