import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invex.errors import InputError, ParameterError
from invex.prox import (
    brute_force_prox,
    lp_quasinorm_prox,
    prox_objective,
    prox_scalar,
    prox_vector,
    psi,
)
from invex.regularizers import Regularizer, subdiff_scalar

KINDS = [
    Regularizer.lp(0.5),
    Regularizer.lp(0.3),
    Regularizer.lp(0.8, 0.6),
    Regularizer.of("log"),
    Regularizer.of("ratio"),
    Regularizer.of("sq"),
    Regularizer.of("log_minus_ratio"),
    Regularizer.of("l1"),
]
regs = st.sampled_from(KINDS)
lams = st.floats(1e-6, 1.0)
ts = st.floats(-10, 10, allow_nan=False)


def test_soft_threshold_example():
    assert prox_scalar(Regularizer.of("l1"), 0.3, -1.0) == pytest.approx(-0.7, abs=1e-15)


def test_log_closed_form():
    expected = (1 + math.sqrt(7)) / 2
    w = prox_scalar(Regularizer.of("log"), 0.5, 2.0)
    assert w == pytest.approx(expected, abs=1e-12)
    assert w == pytest.approx(1.822876, abs=1e-6)
    assert brute_force_prox(Regularizer.of("log"), 0.5, 2.0) == pytest.approx(expected, abs=1e-6)


def test_unshifted_quasinorm_threshold():
    # beta = 1 and tau = 1.5 for lam = 1, p = 1/2
    assert lp_quasinorm_prox(1.2, 1.0, 0.5) == 0.0
    assert lp_quasinorm_prox(1.5, 1.0, 0.5) == 0.0
    w = lp_quasinorm_prox(2.0, 1.0, 0.5)
    assert 1.0 <= w <= 2.0
    assert 0.5 * w ** -0.5 + w == pytest.approx(2.0, abs=1e-10)


@given(st.floats(-10, 10), st.floats(0.05, 1.0), st.floats(0.1, 0.9))
def test_unshifted_quasinorm_is_global(t, lam, p):
    w = lp_quasinorm_prox(t, lam, p)

    def h(v):
        return lam * np.abs(v) ** p + 0.5 * (v - t) ** 2

    grid = np.linspace(-abs(t) - 1, abs(t) + 1, 40001)
    assert h(w) <= h(grid).min() + 1e-6


def test_shifted_lp_example():
    reg = Regularizer.lp(0.5)
    w = prox_scalar(reg, 1.0, 1.2)
    assert w == pytest.approx(0.728713563971, abs=1e-11)
    ref = brute_force_prox(reg, 1.0, 1.2)
    assert prox_objective(reg, 1.0, w, 1.2) <= prox_objective(reg, 1.0, ref, 1.2) + 1e-12


@pytest.mark.parametrize("reg", KINDS, ids=lambda r: r.label)
def test_zero_maps_to_zero(reg):
    assert prox_scalar(reg, 0.7, 0.0) == 0.0
    assert np.array_equal(prox_vector(reg, 0.7, np.zeros(5)), np.zeros(5))


def test_vector_soft_threshold():
    out = prox_vector(Regularizer.of("l1"), 1.0, [2, 0.5, -1, 0])
    assert np.array_equal(out, [1, 0, 0, 0])


def test_ratio_large_input():
    reg = Regularizer.of("ratio")
    w = prox_vector(reg, 0.5, [10.0])[0]
    assert 9.9 < w < 10.0
    assert psi(reg, 0.5, w) == pytest.approx(10.0, abs=1e-12)
    ref = brute_force_prox(reg, 0.5, 10.0)
    assert w == pytest.approx(ref, abs=1e-6)


def test_ratio_small_input_has_no_root():
    reg = Regularizer.of("ratio")
    assert prox_scalar(reg, 1.0, 0.4) == 0.0


def test_oracle_small_cases():
    assert brute_force_prox(Regularizer.of("l1"), 0.3, -1.0) == pytest.approx(-0.7, abs=1e-6)
    assert abs(brute_force_prox(Regularizer.of("log"), 0.5, 0.0)) <= 1e-3


@pytest.mark.parametrize("lam", [0.0, -0.5, 1.5, math.nan])
def test_rejects_lambda(lam):
    with pytest.raises(ParameterError):
        prox_scalar(Regularizer.of("l1"), lam, 1.0)


@pytest.mark.parametrize("t", [math.inf, -math.inf, math.nan])
def test_rejects_non_finite(t):
    with pytest.raises(InputError):
        prox_scalar(Regularizer.of("log"), 0.5, t)
    with pytest.raises(InputError):
        prox_vector(Regularizer.of("log"), 0.5, [1.0, t])


@given(regs, lams, ts)
def test_matches_oracle(reg, lam, t):
    w = prox_scalar(reg, lam, t)
    ref = brute_force_prox(reg, lam, t)
    h, h_ref = prox_objective(reg, lam, w, t), prox_objective(reg, lam, ref, t)
    assert abs(h - h_ref) <= 1e-8


@given(regs, lams, ts)
def test_firm_shrinkage(reg, lam, t):
    w = prox_scalar(reg, lam, t)
    assert abs(w) <= abs(t)
    assert w == 0.0 or np.sign(w) == np.sign(t)


@given(regs, lams, ts)
def test_stationarity(reg, lam, t):
    w = prox_scalar(reg, lam, t)
    gap = subdiff_scalar(reg, w).distance((t - w) / lam) * lam
    assert gap <= 1e-6


@given(regs, st.floats(-5, 5))
def test_objective_is_convex(reg, u):
    w = np.linspace(-5, 5, 1001)
    w = w[w != 0]
    d = 1e-3
    second = (prox_objective(reg, 1.0, w + d, u) - 2 * prox_objective(reg, 1.0, w, u)
              + prox_objective(reg, 1.0, w - d, u))
    assert second.min() >= -1e-8


@pytest.mark.parametrize("kind", ["ratio", "sq", "log_minus_ratio"])
@given(lam=lams)
def test_psi_increasing(kind, lam):
    reg = Regularizer.of(kind)
    w = np.linspace(0, 20, 4001)
    assert np.all(np.diff(psi(reg, lam, w)) > 0)


@given(regs, lams, st.lists(ts, min_size=1, max_size=30))
def test_vector_is_elementwise(reg, lam, u):
    out = prox_vector(reg, lam, u)
    assert np.array_equal(out, [prox_scalar(reg, lam, t) for t in u])


@given(st.sampled_from(KINDS[-1:]), lams, ts, ts)
def test_l1_nonexpansive(reg, lam, s, t):
    assert abs(prox_scalar(reg, lam, s) - prox_scalar(reg, lam, t)) <= abs(s - t) + 1e-15
