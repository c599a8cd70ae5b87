import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import linalg

from oracles import gauss_solve, naive_dft, simpson_matexp_action, two_state_expm
from regime_futures.errors import LengthNotPowerOfTwo, NonFinite, NonSquare, ZeroPivot
from regime_futures.numerics import (TridiagonalSystem, dft, idft, integrated_matexp_action,
                                     is_power_of_two, matrix_exponential, solve_tridiagonal)

finite = st.floats(-1.0, 1.0, allow_nan=False)


# ---------------------------------------------------------------- matrix exponential

def test_expm_of_zero_is_identity():
    assert np.array_equal(matrix_exponential(np.zeros((3, 3))), np.eye(3))


def test_expm_diagonal():
    d = np.array([-1.5, 0.0, 2.25])
    np.testing.assert_allclose(matrix_exponential(np.diag(d)), np.diag(np.exp(d)), rtol=1e-14)


@pytest.mark.parametrize("t", [0.01, 0.3, 1.0, 7.5])
def test_expm_two_state_generator(t):
    q = np.array([[-2.0, 2.0], [4.0, -4.0]])
    np.testing.assert_allclose(matrix_exponential(q * t), two_state_expm(2.0, 4.0, t),
                               rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("scale", [1e-3, 0.4, 3.0, 40.0])
def test_expm_matches_reference_across_pade_degrees(scale):
    rng = np.random.default_rng(11)
    a = rng.standard_normal((5, 5))
    a *= scale / np.linalg.norm(a, 1)
    np.testing.assert_allclose(matrix_exponential(a), linalg.expm(a), rtol=1e-12, atol=1e-14)


def test_expm_stacked_input_matches_loop():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 3, 3)) * np.array([0.01, 0.1, 1, 2, 5, 20])[:, None, None]
    stacked = matrix_exponential(a)
    for k in range(6):
        np.testing.assert_allclose(stacked[k], matrix_exponential(a[k]), rtol=1e-13)


def test_expm_rejects_bad_input():
    with pytest.raises(NonSquare):
        matrix_exponential(np.zeros((2, 3)))
    with pytest.raises(NonFinite):
        matrix_exponential(np.array([[0.0, np.nan], [0.0, 0.0]]))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (4, 4), elements=finite))
def test_expm_inverse_property(a):
    a = a * 5.0 / max(np.linalg.norm(a, 2), 1.0)  # keep ||a|| <= 5
    np.testing.assert_allclose(matrix_exponential(a) @ matrix_exponential(-a), np.eye(4), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(0.0, 10.0)), st.floats(0.0, 5.0))
def test_expm_generator_rows_sum_to_one(rates, t):
    q = rates.copy()
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    p = matrix_exponential(q * t)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-10)


# ---------------------------------------------------------------- integrated action

def test_integrated_action_zero_tau():
    out = integrated_matexp_action(np.ones((2, 2)), np.array([1.0, 2.0]), 0.0)
    assert np.array_equal(out, np.zeros(2))


def test_integrated_action_zero_matrix():
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(integrated_matexp_action(np.zeros((3, 3)), v, 1.7), 1.7 * v, rtol=1e-15)


def test_integrated_action_matches_simpson():
    rng = np.random.default_rng(5)
    a, v = rng.standard_normal((3, 3)), rng.standard_normal(3)
    np.testing.assert_allclose(integrated_matexp_action(a, v, 1.3),
                               simpson_matexp_action(a, v, 1.3), rtol=1e-9, atol=1e-11)


def test_integrated_action_vector_of_times():
    q = np.array([[-0.8, 0.8], [0.6, -0.6]])
    v = np.array([0.005, 0.045])
    taus = np.array([0.0, 0.25, 1.0])
    out = integrated_matexp_action(q, v, taus)
    assert out.shape == (3, 2)
    for k, tau in enumerate(taus):
        np.testing.assert_allclose(out[k], integrated_matexp_action(q, v, tau), rtol=1e-14)


# ---------------------------------------------------------------- tridiagonal

def test_tridiagonal_identity():
    rhs = np.array([3.0, -1.0, 2.0, 7.0])
    sys_ = TridiagonalSystem(np.zeros(3), np.ones(4), np.zeros(3), rhs)
    np.testing.assert_array_equal(solve_tridiagonal(sys_), rhs)


def test_tridiagonal_hand_case():
    lo, di, up = np.array([1.0, 2.0]), np.array([4.0, 5.0, 6.0]), np.array([1.0, 1.0])
    rhs = np.array([6.0, 14.0, 22.0])
    dense = np.diag(di) + np.diag(lo, -1) + np.diag(up, 1)
    expected = gauss_solve(dense, rhs)
    np.testing.assert_allclose(expected, [1.0, 2.0, 3.0], rtol=1e-14)
    np.testing.assert_allclose(solve_tridiagonal(TridiagonalSystem(lo, di, up, rhs)), expected,
                               rtol=1e-14)


def test_tridiagonal_zero_pivot():
    sys_ = TridiagonalSystem(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]), np.ones(2))
    with pytest.raises(ZeroPivot):
        solve_tridiagonal(sys_)


def test_tridiagonal_dimension_check():
    with pytest.raises(ValueError):
        TridiagonalSystem(np.zeros(2), np.ones(4), np.zeros(3), np.ones(4))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2 ** 32 - 1))
def test_tridiagonal_residual_dominant(n, seed):
    rng = np.random.default_rng(seed)
    lo, up = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
    di = rng.uniform(2.1, 4.0, n) * rng.choice([-1, 1], n)
    rhs = rng.standard_normal(n)
    x = solve_tridiagonal(TridiagonalSystem(lo, di, up, rhs))
    dense = np.diag(di) + np.diag(lo, -1) + np.diag(up, 1)
    assert np.max(np.abs(dense @ x - rhs)) <= 1e-10 * np.max(np.abs(rhs))


# ---------------------------------------------------------------- Fourier

def test_dft_constant_gives_impulse():
    out = dft(np.full(8, 2.0))
    np.testing.assert_allclose(out, np.r_[16.0, np.zeros(7)], atol=1e-14)


def test_dft_impulse_gives_constant():
    x = np.zeros(16)
    x[0] = 1.0
    np.testing.assert_allclose(dft(x), np.ones(16), atol=1e-15)


def test_dft_matches_naive_sum():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    np.testing.assert_allclose(dft(x), naive_dft(x), rtol=1e-12, atol=1e-12)


def test_dft_requires_power_of_two():
    assert is_power_of_two(1024) and not is_power_of_two(12) and not is_power_of_two(0)
    with pytest.raises(LengthNotPowerOfTwo):
        dft(np.ones(12))
    with pytest.raises(LengthNotPowerOfTwo):
        idft(np.ones(6))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 16), st.integers(0, 2 ** 32 - 1))
def test_fft_round_trip(k, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(2 ** k) + 1j * rng.standard_normal(2 ** k)
    back = idft(dft(x))
    assert np.max(np.abs(back - x)) <= 1e-10 * np.max(np.abs(x))
