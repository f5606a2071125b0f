import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invex.checks import descent_instance, pnp_instance
from invex.errors import ConfigurationError, DivergenceError, ParameterError
from invex.linops import from_matrix, identity, make_gaussian_sensing
from invex.prox import prox_vector
from invex.regularizers import Regularizer, weak_convexity
from invex.rng import gaussian, make_rng
from invex.solvers import (
    Denoiser,
    Problem,
    SolverConfig,
    SolverTrace,
    apg,
    averaged_shrink_denoiser,
    folded_pg,
    grad_f,
    identity_denoiser,
    next_momentum,
    objective,
    pnp_apg,
    prox_denoiser,
    prox_gradient_residual,
)

KINDS = [
    Regularizer.lp(0.5),
    Regularizer.of("log"),
    Regularizer.of("ratio"),
    Regularizer.of("sq"),
    Regularizer.of("log_minus_ratio"),
    Regularizer.of("l1"),
]
L1 = Regularizer.of("l1")


def _toy():
    return Problem(identity(4), np.array([2.0, 0.5, -1.0, 0.0]), L1, 1.0)


def _tall(seed, m=24, n=16):
    rng = make_rng(seed)
    H = gaussian(rng, (m, n)) / math.sqrt(m) + np.vstack([np.eye(n), np.zeros((m - n, n))])
    return from_matrix(H), gaussian(rng, (m,))


def test_grad_examples():
    A = from_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    x = np.array([0.3, -0.4])
    prob = Problem(A, A @ x, L1, 0.5)
    assert np.allclose(grad_f(prob, x), 0.0)
    prob = Problem(identity(3), np.zeros(3), L1, 0.5)
    assert np.allclose(grad_f(prob, [1.0, -2.0, 3.0]), [1.0, -2.0, 3.0])


def test_grad_finite_difference():
    H, b = _tall(0, 10, 6)
    prob = Problem(H, b, L1, 0.1)
    x = gaussian(make_rng(5), (6,))

    def f(v):
        r = H @ v - b
        return 0.5 * r @ r

    h = 1e-6
    fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(6)])
    assert np.allclose(grad_f(prob, x), fd, atol=1e-5)


def test_momentum_sequence():
    assert next_momentum(1.0) == pytest.approx((math.sqrt(5) + 1) / 2, abs=1e-15)
    assert next_momentum(1.0) == pytest.approx(1.618034, abs=1e-6)
    assert next_momentum(0.0) == 1.0


@pytest.mark.parametrize("solver", [apg, folded_pg])
def test_soft_threshold_solution(solver):
    x, trace = solver(_toy(), SolverConfig(T=200))
    assert np.allclose(x, [1.0, 0.0, 0.0, 0.0], atol=1e-10)
    assert np.allclose(x, prox_vector(L1, 1.0, _toy().b), atol=1e-10)
    assert trace.t[0] == 0 and trace.t[-1] == 200


def test_tiny_weight_inverts():
    rng = make_rng(3)
    H = np.eye(8) + 0.2 * gaussian(rng, (8, 8)) / math.sqrt(8)
    b = gaussian(rng, (8,))
    prob = Problem(from_matrix(H), b, Regularizer.of("l1"), 1e-12)
    x, _ = apg(prob, SolverConfig(T=2000))
    assert np.allclose(x, np.linalg.solve(H, b), atol=1e-4)


def test_folded_fixed_point():
    prob = _toy()
    x0 = np.array([1.0, 0.0, 0.0, 0.0])
    _, trace = folded_pg(prob, SolverConfig(T=50, x0=x0))
    assert max(trace.residual) <= 1e-12


@pytest.mark.parametrize("reg", KINDS, ids=lambda r: r.label)
def test_apg_descent(reg):
    for seed in range(8):
        _, trace = apg(descent_instance(reg, seed), SolverConfig(T=300, record_timing=False))
        assert np.max(np.diff(trace.objective)) <= 1e-10
        assert all(math.isfinite(v) for v in trace.objective)


@pytest.mark.parametrize("reg", KINDS, ids=lambda r: r.label)
def test_folded_decrease_at_unit_weight(reg):
    for seed in range(8):
        _, trace = folded_pg(descent_instance(reg, seed), SolverConfig(T=300, record_timing=False))
        assert min(trace.margin) >= -1e-8
        assert np.max(np.diff(trace.objective)) <= 1e-10


@settings(max_examples=40)
@given(st.sampled_from(KINDS), st.floats(0.01, 1.0), st.integers(0, 2**31))
def test_folded_decrease_weighted_bound(reg, lam, seed):
    # F(x) - F(x+) >= (1/alpha - rho*lam/2 - L/2) ||x - x+||**2 for any lam
    prob = descent_instance(reg, seed, lam=lam)
    _, tr = folded_pg(prob, SolverConfig(T=60, record_timing=False))
    L, alpha = tr.L, 1.9 / (tr.L + 2.0)
    coef = 1.0 / alpha - weak_convexity(reg) * lam / 2.0 - L / 2.0
    dec = -np.diff(tr.objective)
    d2 = np.array(tr.residual[1:]) ** 2
    assert np.all(dec - coef * d2 >= -1e-8 * (1 + np.abs(tr.objective[1:])))


def test_recorded_margin_can_fail_below_unit_weight():
    prob = Problem(identity(4), np.array([2.0, 0.5, -1.0, 3.0]), L1, 0.1)
    _, tr = folded_pg(prob, SolverConfig(T=5))
    assert min(tr.margin) < -1e-3


def test_stationarity_at_exit():
    for seed in range(3):
        H, b = _tall(seed)
        for reg in KINDS:
            prob = Problem(H, b, reg, 0.05)
            x, tr = apg(prob, SolverConfig(T=2000, record_timing=False))
            assert prox_gradient_residual(prob, x, 0.99 / tr.L) < 1e-5


def test_multistart_agrees():
    H, b = _tall(11)
    for reg in KINDS:
        prob = Problem(H, b, reg, 0.1)
        finals = []
        for s in range(10):
            x0 = 3.0 * gaussian(make_rng(100 + s), (16,))
            x, _ = apg(prob, SolverConfig(T=500, x0=x0, record_timing=False))
            finals.append(objective(prob, x))
        assert max(finals) - min(finals) <= 1e-6


def test_step_bounds():
    prob = _toy()
    with pytest.raises(ConfigurationError):
        apg(prob, SolverConfig(alpha1=1.0, L=1.0))
    with pytest.raises(ConfigurationError):
        folded_pg(prob, SolverConfig(alpha_t=2.0 / 3.0, L=1.0))
    with pytest.raises(ConfigurationError):
        apg(prob, SolverConfig(L=-1.0))


def test_divergence_carries_trace():
    den = Denoiser(lambda x: np.full_like(x, np.nan), None, "nan")
    with pytest.raises(DivergenceError) as info:
        pnp_apg(_toy(), den, SolverConfig(T=5))
    assert info.value.trace is not None and len(info.value.trace.t) == 2


def test_problem_validation():
    with pytest.raises(ParameterError):
        Problem(identity(2), np.zeros(2), L1, 0.0)
    with pytest.raises(ValueError):
        Problem(identity(2), np.zeros(3), L1, 0.5)


def test_pnp_identity_denoiser():
    x, tr = pnp_apg(_toy(), identity_denoiser(), SolverConfig(T=30))
    assert all(math.isfinite(v) for v in tr.objective)
    assert tr.notes


@pytest.mark.parametrize("reg", [L1, Regularizer.lp(0.5), Regularizer.of("sq")], ids=lambda r: r.label)
def test_pnp_with_prox_matches_apg(reg):
    prob = descent_instance(reg, 4)
    cfg = SolverConfig(T=5, record_timing=False)
    x_a, tr_a = apg(prob, cfg)
    a1 = 0.99 / tr_a.L
    x_p, tr_p = pnp_apg(prob, prox_denoiser(reg, a1 * prob.lam), cfg)
    assert np.allclose(tr_a.objective, tr_p.objective, atol=1e-10, rtol=0)
    assert np.allclose(x_a, x_p, atol=1e-10)


def test_pnp_residual_mean_shrinks():
    prob, x0 = pnp_instance(32, seed=0)
    den = averaged_shrink_denoiser(prob.reg, prob.lam, 0.5)
    _, tr = pnp_apg(prob, den, SolverConfig(T=400, x0=x0, record_timing=False))
    assert tr.running_mean_fixed_point(400) <= tr.running_mean_fixed_point(100)
    assert tr.kappa == 0.5


def test_averaged_shrink():
    d = averaged_shrink_denoiser(L1, 1.0, 0.5)
    assert d(np.zeros(3)).tolist() == [0.0, 0.0, 0.0]
    assert d(np.array([2.0]))[0] == pytest.approx(1.5)
    for beta in (0.0, 1.0):
        with pytest.raises(ParameterError):
            averaged_shrink_denoiser(L1, 1.0, beta)
    bad = Denoiser(lambda x: x[:-1], None, "truncate")
    with pytest.raises(ValueError):
        bad(np.zeros(3))


@pytest.mark.parametrize("lam", [0.1, 0.5, 1.0])
def test_averaged_shrink_nonexpansive(lam):
    d = averaged_shrink_denoiser(L1, lam, 0.5)
    rng = make_rng(7)
    for _ in range(1000):
        x, y = 3 * gaussian(rng, (5,)), 3 * gaussian(rng, (5,))
        assert np.linalg.norm(d(x) - d(y)) <= np.linalg.norm(x - y) + 1e-12


def test_trace_csv_round_trip():
    _, tr = apg(_toy(), SolverConfig(T=10, record_timing=False))
    text = tr.to_csv()
    assert text.splitlines()[0] == "t,objective,residual,ms"
    back = SolverTrace.from_csv(text)
    assert back.objective == tr.objective and back.t == tr.t
    assert all(line.endswith(",0.000") for line in text.splitlines()[1:])


def test_early_stop():
    _, tr = apg(_toy(), SolverConfig(T=1000, tol=1e-12))
    assert tr.t[-1] < 1000


def test_solver_is_deterministic():
    prob = descent_instance(Regularizer.lp(0.5), 1)
    cfg = SolverConfig(T=100, record_timing=False)
    assert apg(prob, cfg)[1].to_csv() == apg(prob, cfg)[1].to_csv()


def test_sensing_problem_shapes():
    H = make_gaussian_sensing(10, 20, 0)
    prob = Problem(H, np.ones(10), L1, 0.5)
    x, _ = folded_pg(prob, SolverConfig(T=3))
    assert x.shape == (20,)
