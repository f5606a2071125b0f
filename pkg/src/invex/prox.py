"""Proximal operators of the separable regularizers.

For a scalar input ``t`` the prox solves ``argmin_w lam*r(w) + (w - t)**2 / 2``.
The minimizer has the sign of ``t`` (or is zero), and on ``w > 0`` the
stationarity condition reads ``psi(w) = |t|`` with

    psi(w) = lam * r'(w) + w,

which is strictly increasing for every kind when ``0 < lam <= 1``. The
candidate set is therefore ``{0}`` plus the unique positive root of
``psi(w) = |t|`` when ``psi(0+) < |t|``; the candidate with the smaller
objective is returned (zero on ties).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InputError, ParameterError
from .regularizers import Kind, Regularizer, _magnitude_slope, penalty

__all__ = [
    "prox_objective",
    "psi",
    "prox_scalar",
    "prox_vector",
    "brute_force_prox",
    "lp_quasinorm_prox",
    "ROOT_TOL",
    "ROOT_MAX_ITER",
]

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200


def _check_lam(lam):
    lam = float(lam)
    if not (0.0 < lam <= 1.0) or math.isnan(lam):
        raise ParameterError(f"lambda must lie in (0, 1], got {lam}")
    return lam


def prox_objective(reg: Regularizer, lam: float, w, t):
    """``lam*r(w) + (w - t)**2 / 2``, elementwise."""
    w = np.asarray(w, dtype=float)
    return lam * penalty(reg, w) + 0.5 * (w - t) ** 2


def psi(reg: Regularizer, lam: float, w):
    """Monotone stationarity map ``lam*r'(w) + w`` on ``w >= 0``."""
    w = np.asarray(w, dtype=float)
    return lam * _magnitude_slope(reg, w) + w


def _curvature(reg: Regularizer, w):
    """r''(w) for w >= 0."""
    kind = reg.kind
    if kind is Kind.LP:
        p = reg.p
        return p * (p - 1.0) * (w + reg.epsilon) ** (p - 2.0)
    if kind is Kind.LOG:
        return -1.0 / (1.0 + w) ** 2
    if kind is Kind.RATIO:
        return -1.0 / (1.0 + w) ** 3
    if kind is Kind.SQ:
        w2 = w * w
        return (2.0 - 6.0 * w2) / (1.0 + w2) ** 3
    if kind is Kind.LOG_MINUS_RATIO:
        return -w / (1.0 + w) ** 3
    return np.zeros_like(w)


def _solve_psi(reg, lam, a):
    """Root of psi(w) = a on [0, a], for a with psi(0) < a.

    Newton steps are taken when they stay inside the current bracket,
    bisection otherwise.
    """
    lo = np.zeros_like(a)
    hi = a.copy()
    w = 0.5 * (lo + hi)
    # converged entries are frozen so each result is independent of its
    # neighbours in the vector
    done = np.zeros(a.shape, dtype=bool)
    for _ in range(ROOT_MAX_ITER):
        f = psi(reg, lam, w) - a
        exact = f == 0
        lo = np.where(f < 0, w, lo)
        hi = np.where(f > 0, w, hi)
        slope = 1.0 + lam * _curvature(reg, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(slope > 0, f / slope, np.inf)
        cand = w - step
        inside = (cand >= lo) & (cand <= hi)
        w_new = np.where(inside, cand, 0.5 * (lo + hi))
        w_new = np.where(exact | done, w, w_new)
        done |= exact | (np.abs(w_new - w) <= ROOT_TOL) | (hi - lo <= ROOT_TOL)
        w = w_new
        if np.all(done):
            break
    return w


def _positive_root(reg: Regularizer, lam: float, a):
    """Positive stationary point for each magnitude in ``a`` (nan if none)."""
    root = np.full_like(a, np.nan)
    active = a > psi(reg, lam, 0.0)
    if not np.any(active):
        return root
    aa = a[active]
    kind = reg.kind
    if kind is Kind.L1:
        root[active] = aa - lam
    elif kind is Kind.LOG:
        # larger root of w**2 + (1 - a) w + lam - a = 0
        disc = (aa + 1.0) ** 2 - 4.0 * lam
        beta = 0.5 * (aa - 1.0 + np.sqrt(np.maximum(disc, 0.0)))
        root[active] = np.where((disc >= 0) & (beta >= 0), beta, np.nan)
    else:
        root[active] = _solve_psi(reg, lam, aa)
    return root


def _prox(reg, lam, u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InputError("prox input contains non-finite values")
    a = np.abs(u)
    root = _positive_root(reg, lam, a)
    has_root = ~np.isnan(root)
    mag = np.zeros_like(a)
    if np.any(has_root):
        r = root[has_root]
        at = a[has_root]
        better = prox_objective(reg, lam, r, at) < prox_objective(reg, lam, 0.0, at)
        mag[has_root] = np.where(better, r, 0.0)
    return np.sign(u) * mag


def prox_vector(reg: Regularizer, lam: float, u) -> np.ndarray:
    """Elementwise prox of ``lam * g`` at ``u``."""
    lam = _check_lam(lam)
    return _prox(reg, lam, u)


def prox_scalar(reg: Regularizer, lam: float, t: float) -> float:
    """Global minimizer of ``lam*r(w) + (w - t)**2 / 2``."""
    lam = _check_lam(lam)
    t = float(t)
    if not math.isfinite(t):
        raise InputError(f"t must be finite, got {t}")
    return float(_prox(reg, lam, np.array([t]))[0])


def brute_force_prox(reg: Regularizer, lam: float, t: float,
                     halfwidth: float | None = None, step: float = 1e-3) -> float:
    """Grid-search oracle for ``prox_scalar``.

    Scans ``[-halfwidth, halfwidth]`` with spacing ``step`` and refines the
    best grid point with a bounded scalar minimization on the neighbouring
    cell. Independent of the root-finding path used by ``prox_scalar``.
    """
    t = float(t)
    if halfwidth is None:
        halfwidth = abs(t) + 1.0
    if step <= 0:
        raise ParameterError("step must be positive")
    n = int(math.ceil(halfwidth / step))
    grid = np.arange(-n, n + 1) * step
    values = prox_objective(reg, lam, grid, t)
    i = int(np.argmin(values))
    best_w, best_v = float(grid[i]), float(values[i])

    def h(w):
        return float(prox_objective(reg, lam, w, t))

    res = minimize_scalar(h, bounds=(best_w - step, best_w + step),
                          method="bounded", options={"xatol": 1e-13})
    if res.fun < best_v:
        best_w, best_v = float(res.x), float(res.fun)
    # the kink at zero is a common minimizer that the refinement may miss
    if abs(best_w) <= step and h(0.0) <= best_v:
        best_w = 0.0
    return best_w


def lp_quasinorm_prox(t, lam: float, p: float):
    """Prox of the unshifted quasinorm ``lam*|w|**p`` with hard thresholding.

    Zero below ``tau = beta + lam*p*beta**(p-1)`` with
    ``beta = (2*lam*(1-p))**(1/(2-p))``; above it, the root of
    ``lam*p*y**(p-1) + y = |t|`` on ``[beta, |t|]``. Ties at ``|t| == tau``
    resolve to zero.
    """
    lam = _check_lam(lam)
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    u = np.asarray(t, dtype=float)
    a = np.abs(u)
    beta = (2.0 * lam * (1.0 - p)) ** (1.0 / (2.0 - p))
    tau = beta + lam * p * beta ** (p - 1.0)
    out = np.zeros_like(a)
    active = a > tau
    if np.any(active):
        aa = a[active]
        lo = np.full_like(aa, beta)
        hi = aa.copy()
        for _ in range(ROOT_MAX_ITER):
            mid = 0.5 * (lo + hi)
            f = lam * p * mid ** (p - 1.0) + mid - aa
            lo = np.where(f < 0, mid, lo)
            hi = np.where(f < 0, hi, mid)
            if np.all(hi - lo <= ROOT_TOL):
                break
        out[active] = 0.5 * (lo + hi)
    res = np.sign(u) * out
    return float(res) if res.ndim == 0 else res
