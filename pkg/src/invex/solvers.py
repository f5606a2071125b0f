"""Proximal solvers for ``min_x 0.5*||Hx - b||**2 + lam*g(x)``.

* :func:`apg` -- accelerated proximal gradient with a monitored selection
  between an extrapolated prox step and a plain prox step.
* :func:`folded_pg` -- plain proximal gradient (the iteration that unrolled
  networks stack as layers).
* :func:`pnp_apg` -- :func:`apg` with the plain prox step replaced by an
  arbitrary denoiser.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DivergenceError, InputError, ParameterError
from .linops import LinearOperator, estimate_lipschitz
from .prox import prox_vector
from .regularizers import Kind, Regularizer, penalty

__all__ = [
    "Problem",
    "SolverConfig",
    "SolverTrace",
    "Denoiser",
    "grad_f",
    "objective",
    "next_momentum",
    "apg",
    "folded_pg",
    "pnp_apg",
    "averaged_shrink_denoiser",
    "prox_denoiser",
    "identity_denoiser",
    "prox_gradient_residual",
]

DIVERGENCE_TOL = 1e-6


@dataclass(frozen=True)
class Problem:
    H: LinearOperator
    b: np.ndarray
    reg: Regularizer
    lam: float

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).ravel()
        if b.size != self.H.out_dim:
            raise InputError(f"b has {b.size} entries, operator outputs {self.H.out_dim}")
        if not np.all(np.isfinite(b)):
            raise InputError("b contains non-finite values")
        if not 0.0 < self.lam <= 1.0:
            raise ParameterError(f"lambda must lie in (0, 1], got {self.lam}")
        object.__setattr__(self, "b", b)


@dataclass
class SolverConfig:
    """Iteration budget and step sizes.

    Unset step sizes default to the largest admissible values
    (``0.99/L`` for APG, ``1.9/(L + 2)`` for the folded iteration). ``L``
    defaults to a power-iteration estimate of ``sigma_1(H^T H)``. ``tol``
    enables an early stop on the step norm; ``None`` runs all ``T``
    iterations.
    """

    T: int = 800
    alpha1: float | None = None
    alpha2: float | None = None
    alpha_t: float | None = None
    L: float | None = None
    x0: np.ndarray | None = None
    seed: int = 0
    tol: float | None = None
    record_timing: bool = True


@dataclass
class SolverTrace:
    """Per-iteration log; row 0 is the starting point."""

    t: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    ms: list = field(default_factory=list)
    # folded_pg: F(x_t) - F(x_{t+1}) - (1/(alpha*lam) - 1 - L/2) ||x_t - x_{t+1}||^2
    margin: list = field(default_factory=list)
    # pnp_apg: ||x_t - d(x_t - alpha1 grad f(x_t))||^2
    fixed_point_residual: list = field(default_factory=list)
    L: float | None = None
    kappa: float | None = None
    notes: list = field(default_factory=list)

    def record(self, t, obj, res, ms):
        self.t.append(int(t))
        self.objective.append(float(obj))
        self.residual.append(float(res))
        self.ms.append(float(ms))

    def to_csv(self, path_or_file=None) -> str:
        """Write ``t,objective,residual,ms`` rows; returns the CSV text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "objective", "residual", "ms"])
        for row in zip(self.t, self.objective, self.residual, self.ms):
            writer.writerow([row[0], repr(row[1]), repr(row[2]), f"{row[3]:.3f}"])
        text = buf.getvalue()
        if path_or_file is not None:
            if hasattr(path_or_file, "write"):
                path_or_file.write(text)
            else:
                with open(path_or_file, "w", newline="") as fh:
                    fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "SolverTrace":
        trace = cls()
        for row in csv.DictReader(io.StringIO(text)):
            trace.record(row["t"], row["objective"], row["residual"], row["ms"])
        return trace

    def running_mean_fixed_point(self, T: int) -> float:
        """``(1/T) * sum_{t=1..T}`` of the recorded fixed-point residuals."""
        vals = self.fixed_point_residual[:T]
        if len(vals) < T:
            raise ParameterError(f"trace holds {len(vals)} residuals, asked for {T}")
        return float(np.mean(vals))


@dataclass(frozen=True)
class Denoiser:
    """Image-to-image map plugged into :func:`pnp_apg`.

    ``kappa`` is the averagedness constant when known.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    kappa: float | None = None
    name: str = "denoiser"

    def __call__(self, x):
        out = np.asarray(self.apply(x), dtype=float)
        if out.shape != np.shape(x):
            raise InputError(f"denoiser changed shape {np.shape(x)} -> {out.shape}")
        return out


def grad_f(prob: Problem, x) -> np.ndarray:
    """``H^T (Hx - b)``."""
    x = np.asarray(x, dtype=float)
    if x.size != prob.H.in_dim:
        raise InputError(f"x has {x.size} entries, operator expects {prob.H.in_dim}")
    return prob.H.adjoint(prob.H.forward(x) - prob.b)


def objective(prob: Problem, x, Hx=None) -> float:
    """``0.5*||Hx - b||**2 + lam*g(x)``."""
    if Hx is None:
        Hx = prob.H.forward(x)
    r = Hx - prob.b
    # non-finite values propagate so the caller can report divergence
    return 0.5 * float(r @ r) + prob.lam * float(np.sum(penalty(prob.reg, x)))


def next_momentum(r: float) -> float:
    return (math.sqrt(4.0 * r * r + 1.0) + 1.0) / 2.0


def prox_gradient_residual(prob: Problem, x, alpha: float) -> float:
    """``||x - prox_{alpha lam g}(x - alpha grad f(x))||``; zero at stationary points."""
    step = prox_vector(prob.reg, alpha * prob.lam, x - alpha * grad_f(prob, x))
    return float(np.linalg.norm(x - step))


def _lipschitz(prob, cfg):
    if cfg.L is not None:
        if not cfg.L > 0:
            raise ConfigurationError(f"L must be positive, got {cfg.L}")
        return float(cfg.L)
    return estimate_lipschitz(prob.H, seed=cfg.seed)


def _start(prob, cfg):
    x0 = prob.H.adjoint(prob.b) if cfg.x0 is None else np.array(cfg.x0, dtype=float).ravel()
    if x0.size != prob.H.in_dim:
        raise InputError(f"x0 has {x0.size} entries, operator expects {prob.H.in_dim}")
    if not np.all(np.isfinite(x0)):
        raise InputError("x0 contains non-finite values")
    return x0


def _apg_steps(cfg, L):
    a1 = 0.99 / L if cfg.alpha1 is None else float(cfg.alpha1)
    a2 = 0.99 / L if cfg.alpha2 is None else float(cfg.alpha2)
    for name, a in (("alpha1", a1), ("alpha2", a2)):
        if not 0.0 < a < 1.0 / L:
            raise ConfigurationError(f"{name}={a} violates 0 < {name} < 1/L = {1.0 / L}")
    return a1, a2


class _Clock:
    def __init__(self, enabled):
        self.enabled = enabled
        self.t0 = time.perf_counter()

    def ms(self):
        return (time.perf_counter() - self.t0) * 1e3 if self.enabled else 0.0


def _check(trace, F_new, F_old, strict=True):
    if not math.isfinite(F_new):
        raise DivergenceError("objective became non-finite", trace)
    if strict and F_new > F_old + DIVERGENCE_TOL:
        raise DivergenceError(
            f"objective increased from {F_old!r} to {F_new!r}", trace)


def _accelerated(prob, cfg, plain_step, strict, fixed_point=False):
    """Shared loop of :func:`apg` and :func:`pnp_apg`.

    ``plain_step(x, grad, alpha1)`` produces the non-extrapolated candidate.
    """
    H, b, lam = prob.H, prob.b, prob.lam
    L = _lipschitz(prob, cfg)
    a1, a2 = _apg_steps(cfg, L)
    clock = _Clock(cfg.record_timing)
    trace = SolverTrace(L=L)

    x = _start(prob, cfg)
    x_prev = x.copy()
    z = x.copy()
    Hx = H.forward(x)
    F_x = objective(prob, x, Hx)
    trace.record(0, F_x, 0.0, clock.ms())
    r_prev, r = 0.0, 1.0

    for t in range(1, cfg.T + 1):
        y = x + (r_prev / r) * (z - x) + ((r_prev - 1.0) / r) * (x - x_prev)
        z_new = prox_vector(prob.reg, a2 * lam, y - a2 * grad_f(prob, y))
        v = plain_step(x, H.adjoint(Hx - b), a1)
        r_prev, r = r, next_momentum(r)

        Hz, Hv = H.forward(z_new), H.forward(v)
        F_z, F_v = objective(prob, z_new, Hz), objective(prob, v, Hv)
        if fixed_point:
            trace.fixed_point_residual.append(float(np.sum((x - v) ** 2)))
        if F_z <= F_v:
            x_new, Hx_new, F_new = z_new, Hz, F_z
        else:
            x_new, Hx_new, F_new = v, Hv, F_v

        step = float(np.linalg.norm(x_new - x))
        trace.record(t, F_new, step, clock.ms())
        _check(trace, F_new, F_x, strict)
        x_prev, x, z, Hx, F_x = x, x_new, z_new, Hx_new, F_new
        if cfg.tol is not None and step < cfg.tol:
            break
    return x, trace


def apg(prob: Problem, cfg: SolverConfig | None = None):
    """Accelerated proximal gradient; returns ``(x, trace)``.

    Each iteration forms the extrapolated point
    ``y = x_t + (r_{t-1}/r_t)(z_t - x_t) + ((r_{t-1} - 1)/r_t)(x_t - x_{t-1})``,
    takes a prox-gradient step from ``y`` (step ``alpha2``) and one from
    ``x_t`` (step ``alpha1``), and keeps whichever has the lower objective.
    The selection makes the objective non-increasing.
    """
    cfg = cfg or SolverConfig()

    def plain(x, g, a1):
        return prox_vector(prob.reg, a1 * prob.lam, x - a1 * g)

    return _accelerated(prob, cfg, plain, strict=True)


def pnp_apg(prob: Problem, den: Denoiser, cfg: SolverConfig | None = None):
    """:func:`apg` with the plain prox step replaced by ``den``.

    The trace also records ``||x_t - den(x_t - alpha1 grad f(x_t))||**2``.
    Only non-finite objectives abort the run: a denoiser is not a descent
    step, so the objective may rise.
    """
    cfg = cfg or SolverConfig()

    def plain(x, g, a1):
        return den(x - a1 * g)

    x, trace = _accelerated(prob, cfg, plain, strict=False, fixed_point=True)
    trace.kappa = den.kappa
    if den.kappa is None:
        trace.notes.append("denoiser averagedness unknown; residual bound not guaranteed")
    return x, trace


def folded_pg(prob: Problem, cfg: SolverConfig | None = None):
    """Proximal gradient ``x <- prox_{alpha lam g}(x - alpha H^T(Hx - b))``.

    ``alpha_t`` must satisfy ``alpha_t < 2/(L + 2)``. The trace records the
    sufficient-decrease margin
    ``F(x_t) - F(x_{t+1}) - (1/(alpha lam) - 1 - L/2) ||x_t - x_{t+1}||**2``.
    """
    cfg = cfg or SolverConfig()
    H, b, lam = prob.H, prob.b, prob.lam
    L = _lipschitz(prob, cfg)
    alpha = 1.9 / (L + 2.0) if cfg.alpha_t is None else float(cfg.alpha_t)
    if not 0.0 < alpha < 2.0 / (L + 2.0):
        raise ConfigurationError(
            f"alpha_t={alpha} violates 0 < alpha_t < 2/(L+2) = {2.0 / (L + 2.0)}")
    coef = 1.0 / (alpha * lam) - 1.0 - L / 2.0
    clock = _Clock(cfg.record_timing)
    trace = SolverTrace(L=L)

    x = _start(prob, cfg)
    Hx = H.forward(x)
    F_x = objective(prob, x, Hx)
    trace.record(0, F_x, 0.0, clock.ms())
    for t in range(1, cfg.T + 1):
        x_new = prox_vector(prob.reg, alpha * lam, x - alpha * H.adjoint(Hx - b))
        Hx_new = H.forward(x_new)
        F_new = objective(prob, x_new, Hx_new)
        d2 = float(np.sum((x - x_new) ** 2))
        trace.margin.append(F_x - F_new - coef * d2)
        step = math.sqrt(d2)
        trace.record(t, F_new, step, clock.ms())
        _check(trace, F_new, F_x)
        x, Hx, F_x = x_new, Hx_new, F_new
        if cfg.tol is not None and step < cfg.tol:
            break
    return x, trace


def averaged_shrink_denoiser(reg: Regularizer, lam: float, beta: float) -> Denoiser:
    """``d(x) = (1 - beta) x + beta prox_{lam g}(x)``, a beta-averaged map."""
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    prox_vector(reg, lam, np.zeros(1))  # validates lam

    def apply(x):
        x = np.asarray(x, dtype=float)
        return (1.0 - beta) * x + beta * prox_vector(reg, lam, x)

    return Denoiser(apply, kappa=beta, name=f"avgshrink({reg.label},{lam:g},{beta:g})")


def prox_denoiser(reg: Regularizer, lam: float) -> Denoiser:
    """The prox itself as a denoiser.

    Only the convex ``l1`` prox is firmly nonexpansive (1/2-averaged); the
    other kinds get no averagedness constant.
    """
    prox_vector(reg, lam, np.zeros(1))
    kappa = 0.5 if reg.kind is Kind.L1 else None
    return Denoiser(lambda x: prox_vector(reg, lam, x), kappa=kappa,
                    name=f"prox({reg.label},{lam:g})")


def identity_denoiser() -> Denoiser:
    return Denoiser(lambda x: np.array(x, dtype=float), kappa=None, name="identity")
