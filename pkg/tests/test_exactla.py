from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sixlab import exactla as la

from oracles import rank_mod_p

matrices = st.integers(0, 6).flatmap(
    lambda r: st.integers(0, 6).flatmap(
        lambda c: st.lists(st.lists(st.integers(-40, 40), min_size=c, max_size=c), min_size=r, max_size=r)
        .map(lambda rows, c=c, r=r: np.array(rows, dtype=np.int64).reshape(r, c))))


def test_empty_rref():
    R, T, r = la.rref(la.zeros(0, 0))
    assert R.shape == (0, 0) and T.shape == (0, 0) and r == 0


def test_identity_rref():
    R, T, r = la.rref(la.eye(3))
    assert np.array_equal(R, la.eye(3)) and np.array_equal(T, la.eye(3)) and r == 3


def test_rank_over_f5():
    assert la.rank(la.mat([[1, 2], [2, 4]], p=5), p=5) == 1


def test_kernel_examples():
    assert la.kernel(la.eye(3)).shape == (3, 0)
    assert np.array_equal(la.kernel(la.zeros(2, 3)), la.eye(3))
    K = la.kernel(la.mat([[1, 1]], p=7), p=7)
    assert K.shape == (2, 1)
    v = K[:, 0] % 7
    assert (v[0] + v[1]) % 7 == 0 and v.any()


def test_solve_examples():
    assert np.array_equal(la.solve(la.eye(2), la.mat([[3], [4]])), la.mat([[3], [4]]))
    assert la.solve(la.mat([[1], [0]]), la.mat([[0], [1]])) is None
    assert np.array_equal(la.solve(la.mat([[2]], p=5), la.mat([[1]], p=5), p=5), la.mat([[3]], p=5))


def test_bad_modulus():
    with pytest.raises(ValueError):
        with la.prime_field(32004):
            pass


def test_prime_context_restores():
    with la.prime_field(7):
        assert la.get_prime() == 7
        assert la.rank(la.mat([[7, 14]])) == 0
    assert la.get_prime() == la.DEFAULT_PRIME


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_rank_nullity_and_kernel(M):
    K = la.kernel(M)
    assert la.is_zero(la.mul(M, K))
    assert la.rank(M) + K.shape[1] == M.shape[1]
    assert la.rank(M) == rank_mod_p(M.tolist())


@settings(max_examples=100, deadline=None)
@given(matrices)
def test_rref_idempotent_and_transform(M):
    R, T, r = la.rref(M)
    assert np.array_equal(la.mul(T, M), R)
    R2, _, r2 = la.rref(R)
    assert np.array_equal(R2, R) and r2 == r


@settings(max_examples=100, deadline=None)
@given(matrices, st.data())
def test_solve_consistency(A, data):
    b = np.array(data.draw(st.lists(st.integers(-9, 9), min_size=A.shape[0], max_size=A.shape[0])),
                 dtype=np.int64).reshape(A.shape[0], 1)
    x = la.solve(A, b)
    consistent = la.rank(np.hstack([A, b])) == la.rank(A)
    assert (x is not None) == consistent
    if x is not None:
        assert np.array_equal(la.mul(A, x), b % la.get_prime())


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_kernels_agree(M):
    if la.kernel_backend() != "compiled":
        pytest.skip("compiled kernel not built")
    try:
        la.set_kernel("numpy")
        a = la.rref(M)
    finally:
        la.set_kernel("compiled")
    b = la.rref(M)
    assert all(np.array_equal(x, y) for x, y in zip(a[:2], b[:2])) and a[2] == b[2]


def test_rational_backend_matches_small_fp():
    M = [[1, 2, 3], [2, 4, 7], [1, 2, 4]]
    R, T, r = la.rref(np.array(M), field=la.QQ)
    assert r == la.rank(la.mat(M)) == 2
    assert all(isinstance(v, Fraction) for v in R.flat)
    x = la.solve(np.array([[2]]), np.array([[1]]), field=la.QQ)
    assert x[0, 0] == Fraction(1, 2)


def test_inverse_roundtrip(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        M = rng.integers(0, la.get_prime(), (n, n))
        if la.rank(M) < n:
            continue
        assert np.array_equal(la.mul(M, la.inverse(M)), la.eye(n))


def test_json_roundtrip(rng):
    M = rng.integers(0, 100, (3, 4))
    assert np.array_equal(la.from_json(la.to_json(M)), M)
