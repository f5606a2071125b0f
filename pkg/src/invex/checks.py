"""Self-checks: property suites over every module, with per-suite counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError
from .linops import (
    adjoint_mismatch,
    compose,
    estimate_lipschitz,
    haar_analysis,
    haar_synthesis,
    make_gaussian_blur,
    make_gaussian_sensing,
    make_haar,
)
from .prox import brute_force_prox, prox_objective, prox_scalar
from .regularizers import Regularizer, subdiff_scalar
from .rng import cell_seed, gaussian, make_rng
from .solvers import (
    Problem,
    SolverConfig,
    apg,
    averaged_shrink_denoiser,
    folded_pg,
    pnp_apg,
)

__all__ = [
    "SuiteResult",
    "CheckReport",
    "ALL_KINDS",
    "run_check",
    "descent_instance",
    "pnp_instance",
]

ALL_KINDS = (
    Regularizer.lp(0.5),
    Regularizer.of("log"),
    Regularizer.of("ratio"),
    Regularizer.of("sq"),
    Regularizer.of("log_minus_ratio"),
    Regularizer.of("l1"),
)


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    total: int = 0
    first_failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def add(self, ok: bool, detail: Callable[[], str] | str = ""):
        self.total += 1
        if ok:
            self.passed += 1
        elif self.first_failure is None:
            self.first_failure = detail() if callable(detail) else detail


@dataclass
class CheckReport:
    suites: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.suites)

    def lines(self) -> list:
        out = []
        for s in self.suites:
            out.append(f"{s.name:<22} {s.passed:>6}/{s.total:<6} {'PASS' if s.ok else 'FAIL'}")
            if s.first_failure:
                out.append(f"    first failure: {s.first_failure}")
        n_ok = sum(s.ok for s in self.suites)
        out.append(f"{n_ok}/{len(self.suites)} suites passed")
        return out


def _prox_oracle(prox, cases, seed):
    suite = SuiteResult("prox_oracle")
    for i, reg in enumerate(ALL_KINDS):
        rng = make_rng(cell_seed(seed, 1, i))
        lams = 1.0 - rng.random(cases)  # (0, 1]
        ts = rng.uniform(-10.0, 10.0, cases)
        for lam, t in zip(lams.tolist(), ts.tolist()):
            w = prox(reg, lam, t)
            w_ref = brute_force_prox(reg, lam, t)
            h = float(prox_objective(reg, lam, w, t))
            h_ref = float(prox_objective(reg, lam, w_ref, t))
            suite.add(h <= h_ref + 1e-8,
                      lambda: f"{reg.label} lam={lam!r} t={t!r}: prox {w!r} "
                              f"(h={h!r}) vs oracle {w_ref!r} (h={h_ref!r})")
    return suite


def _prox_convexity(points, seed):
    suite = SuiteResult("prox_convexity")
    d = 1e-3
    for i, reg in enumerate(ALL_KINDS):
        rng = make_rng(cell_seed(seed, 2, i))
        for u in rng.uniform(-5.0, 5.0, 10).tolist():
            w = np.linspace(-5.0, 5.0, points)
            w = w[w != 0.0]
            second = (prox_objective(reg, 1.0, w + d, u) - 2.0 * prox_objective(reg, 1.0, w, u)
                      + prox_objective(reg, 1.0, w - d, u))
            worst = float(second.min())
            suite.add(worst >= -1e-8, lambda: f"{reg.label} u={u!r}: second difference {worst!r}")
    return suite


def _invex_zero_point(samples, seed):
    suite = SuiteResult("invex_zero_point")
    for i, reg in enumerate(ALL_KINDS):
        rng = make_rng(cell_seed(seed, 3, i))
        ws = rng.uniform(-10.0, 10.0, samples)
        ws = ws[ws != 0.0]
        bad = [w for w in ws.tolist() if subdiff_scalar(reg, w).contains(0.0)]
        suite.add(not bad, lambda: f"{reg.label}: interval at w={bad[0]!r} contains 0")
        at0 = subdiff_scalar(reg, 0.0)
        suite.add(at0.contains(0.0), lambda: f"{reg.label}: interval at 0 is {at0}")
    return suite


def _resolvent(prox, cases, seed):
    suite = SuiteResult("prox_stationarity")
    for i, reg in enumerate(ALL_KINDS):
        rng = make_rng(cell_seed(seed, 4, i))
        for lam, t in zip((1.0 - rng.random(cases)).tolist(),
                          rng.uniform(-10.0, 10.0, cases).tolist()):
            w = prox(reg, lam, t)
            iv = subdiff_scalar(reg, w)
            gap = iv.distance((t - w) / lam) * lam
            suite.add(gap <= 1e-6, lambda: f"{reg.label} lam={lam!r} t={t!r}: gap {gap!r}")
    return suite


def _operators(seed):
    suite = SuiteResult("operators")
    ops = [
        make_gaussian_blur(32, 32, 9, 4.0),
        make_haar(3, 32, 32),
        compose(make_gaussian_blur(32, 32, 9, 4.0), make_haar(3, 32, 32)),
        make_gaussian_sensing(32, 64, seed),
        make_gaussian_sensing(128, 256, seed),
    ]
    for op in ops:
        err = adjoint_mismatch(op, seed=seed, trials=3)
        suite.add(err <= 1e-8, lambda: f"adjoint test on {op.name}: {err!r}")
    img = gaussian(make_rng(cell_seed(seed, 5)), (16, 16))
    for levels in (1, 2, 3, 4):
        c = haar_analysis(img, levels)
        e1 = float(np.max(np.abs(haar_synthesis(c, levels) - img)))
        e2 = float(np.max(np.abs(haar_analysis(haar_synthesis(img, levels), levels) - img)))
        e3 = abs(float(np.linalg.norm(c) - np.linalg.norm(img)))
        suite.add(max(e1, e2, e3) <= 1e-10,
                  lambda: f"haar round trip at {levels} levels: {max(e1, e2, e3)!r}")
    for s in range(3):
        A = make_gaussian_sensing(32, 64, cell_seed(seed, 6, s))
        ref = float(np.linalg.svd(A.matrix, compute_uv=False)[0] ** 2)
        est = estimate_lipschitz(A, iters=5000, tol=1e-14, seed=s)
        rel = abs(est - ref) / ref
        suite.add(rel <= 1e-6, lambda: f"power iteration {est!r} vs svd {ref!r}")
    return suite


def descent_instance(reg: Regularizer, seed: int, n: int = 64, m: int = 48,
                     lam: float = 1.0) -> Problem:
    """Column-normalized Gaussian ``m x n`` problem with a sparse signal."""
    H = make_gaussian_sensing(m, n, cell_seed(seed, 7))
    rng = make_rng(cell_seed(seed, 8))
    x = np.zeros(n)
    support = rng.choice(n, size=8, replace=False)
    x[support] = 3.0 * gaussian(rng, (8,))
    b = H @ x + 0.1 * gaussian(rng, (m,))
    return Problem(H, b, reg, lam)


def _apg_descent(instances, T, seed):
    suite = SuiteResult("apg_descent")
    for reg in ALL_KINDS:
        for s in range(instances):
            prob = descent_instance(reg, cell_seed(seed, 9, s))
            try:
                _, tr = apg(prob, SolverConfig(T=T, record_timing=False))
                rise = float(np.max(np.diff(tr.objective)))
                suite.add(rise <= 1e-10, lambda: f"{reg.label} instance {s}: rise {rise!r}")
            except DivergenceError as exc:
                suite.add(False, f"{reg.label} instance {s}: {exc}")
    return suite


def _folded_decrease(instances, T, seed):
    suite = SuiteResult("folded_decrease")
    for reg in ALL_KINDS:
        for s in range(instances):
            prob = descent_instance(reg, cell_seed(seed, 9, s))
            try:
                _, tr = folded_pg(prob, SolverConfig(T=T, record_timing=False))
                worst = float(np.min(tr.margin))
                suite.add(worst >= -1e-8, lambda: f"{reg.label} instance {s}: margin {worst!r}")
            except DivergenceError as exc:
                suite.add(False, f"{reg.label} instance {s}: {exc}")
    return suite


def pnp_instance(size: int = 32, lam: float = 0.01, seed: int = 0,
                 snr_db: float = 30.0) -> tuple:
    """Blur-plus-Haar deconvolution problem on a seeded piecewise-constant image."""
    from .experiments import build_deconv
    from .images import blocks

    prob, _, x0 = build_deconv(blocks(size), Regularizer.of("l1"), lam, snr_db, seed)
    return prob, x0


def _pnp(seed, size=32, T_long=400, T_short=100):
    suite = SuiteResult("pnp_residual")
    prob, x0 = pnp_instance(size, seed=seed)
    den = averaged_shrink_denoiser(prob.reg, prob.lam, 0.5)
    _, tr = pnp_apg(prob, den, SolverConfig(T=T_long, x0=x0, record_timing=False))
    short, long = tr.running_mean_fixed_point(T_short), tr.running_mean_fixed_point(T_long)
    suite.add(long <= short, lambda: f"mean residual {long!r} at T={T_long} > {short!r} at T={T_short}")
    suite.add(all(math.isfinite(v) for v in tr.objective), "non-finite objective")
    return suite


def run_check(seed: int = 0, prox: Callable | None = None, oracle_cases: int = 200,
              descent_instances: int = 5, descent_T: int = 300) -> CheckReport:
    """Run every suite; ``prox`` replaces :func:`prox_scalar` (test hook)."""
    prox = prox or prox_scalar
    report = CheckReport()
    report.suites.append(_prox_oracle(prox, oracle_cases, seed))
    report.suites.append(_prox_convexity(1000, seed))
    report.suites.append(_invex_zero_point(10_000, seed))
    report.suites.append(_resolvent(prox, oracle_cases, seed))
    report.suites.append(_operators(seed))
    report.suites.append(_apg_descent(descent_instances, descent_T, seed))
    report.suites.append(_folded_decrease(descent_instances, descent_T, seed))
    report.suites.append(_pnp(seed))
    return report
