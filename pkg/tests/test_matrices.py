import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st

from torsionlab.errors import NoIntegerSolution, NotAUnit, NotSymmetric
from torsionlab.matrices import (
    det,
    eye,
    hnf,
    inertia,
    intmat,
    invert_unimodular,
    kernel_basis,
    rank,
    ratmat,
    snf,
    solve_integral,
    solve_rational,
    unit_det,
    zeros,
)


def small_matrices(max_dim=4, max_entry=6):
    return st.integers(1, max_dim).flatmap(
        lambda m: st.integers(1, max_dim).flatmap(
            lambda n: st.lists(
                st.lists(st.integers(-max_entry, max_entry), min_size=n, max_size=n),
                min_size=m,
                max_size=m,
            )
        )
    )


def test_intmat_rejects_floats():
    with pytest.raises(TypeError):
        intmat([[1.5]])


def test_hnf_identity():
    H, U = hnf(eye(3))
    assert np.array_equal(H, eye(3))
    assert np.array_equal(U, eye(3))


def test_hnf_zero():
    M = zeros(2, 3)
    H, U = hnf(M)
    assert np.array_equal(H, M)
    assert np.array_equal(U, eye(2))


def test_hnf_small_example():
    M = intmat([[2, 4], [1, 3]])
    H, U = hnf(M)
    assert np.array_equal(H, U @ M)
    assert abs(det(U)) == 1
    # Upper triangular with nonnegative pivots.
    assert H[1, 0] == 0
    assert H[0, 0] > 0 and H[1, 1] > 0


@settings(max_examples=60, deadline=None)
@given(small_matrices())
def test_hnf_contract(rows):
    M = intmat(rows)
    H, U = hnf(M)
    assert np.array_equal(H, U @ M)
    assert abs(det(U)) == 1


def test_snf_divisibility_example():
    S, U, V = snf(intmat([[2, 0], [0, 3]]))
    assert [int(S[i, i]) for i in range(2)] == [1, 6]
    assert np.array_equal(S, U @ intmat([[2, 0], [0, 3]]) @ V)


def test_snf_identity_and_zero():
    S, U, V = snf(eye(2))
    assert np.array_equal(S, eye(2))
    S, U, V = snf(intmat([[0]]))
    assert S[0, 0] == 0


@settings(max_examples=60, deadline=None)
@given(small_matrices())
def test_snf_contract(rows):
    M = intmat(rows)
    S, U, V = snf(M)
    assert np.array_equal(S, U @ M @ V)
    assert abs(det(U)) == 1 and abs(det(V)) == 1
    diag = [int(S[i, i]) for i in range(min(S.shape))]
    for i in range(S.shape[0]):
        for j in range(S.shape[1]):
            if i != j:
                assert S[i, j] == 0
    for a, b in zip(diag, diag[1:]):
        if a:
            assert b % a == 0
        else:
            assert b == 0
    # Reassembly: U^-1 S V^-1 = M.
    Ui = invert_unimodular(U)
    Vi = invert_unimodular(V)
    assert np.array_equal(Ui @ S @ Vi, M)


def test_unit_det():
    assert unit_det(intmat([[0, 1], [1, 0]])) == 1
    assert unit_det(eye(3)) == 0
    with pytest.raises(NotAUnit):
        unit_det(intmat([[2]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.data())
def test_unit_det_multiplicative(n, data):
    def rand_unimod():
        U = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
        for _ in range(6):
            i = data.draw(st.integers(0, n - 1))
            j = data.draw(st.integers(0, n - 1))
            if i == j:
                continue
            c = data.draw(st.integers(-2, 2))
            for k in range(n):
                U[i][k] += c * U[j][k]
        if data.draw(st.booleans()):
            U[0] = [-x for x in U[0]]
        return intmat(U)

    P, Q = rand_unimod(), rand_unimod()
    assert unit_det(P @ Q) == (unit_det(P) + unit_det(Q)) % 2


def test_kernel_basis_examples():
    K = kernel_basis(intmat([[1, 1]]))
    assert K.shape == (2, 1)
    assert np.array_equal(intmat([[1, 1]]) @ K, zeros(1, 1))
    assert kernel_basis(eye(3)).shape == (3, 0)
    assert kernel_basis(zeros(2, 2)).shape == (2, 2)


@settings(max_examples=60, deadline=None)
@given(small_matrices())
def test_kernel_contract(rows):
    M = intmat(rows)
    K = kernel_basis(M)
    assert np.array_equal(M @ K, zeros(M.shape[0], K.shape[1]))
    assert K.shape[1] == M.shape[1] - rank(M)


def test_solve_integral():
    B = intmat([[3], [4]])
    X = solve_integral(eye(2), B)
    assert np.array_equal(X, B)
    with pytest.raises(NoIntegerSolution):
        solve_integral(intmat([[2]]), intmat([[1]]))
    X = solve_integral(intmat([[1, 0]]), intmat([[5]]))
    assert np.array_equal(intmat([[1, 0]]) @ X, intmat([[5]]))


@settings(max_examples=60, deadline=None)
@given(small_matrices(), st.data())
def test_solve_integral_roundtrip(rows, data):
    M = intmat(rows)
    X0 = intmat(
        [
            [data.draw(st.integers(-3, 3)) for _ in range(2)]
            for _ in range(M.shape[1])
        ]
    )
    B = M @ X0
    X = solve_integral(M, B)
    assert np.array_equal(M @ X, B)


def test_solve_rational_diagnostic():
    assert solve_rational(intmat([[2]]), intmat([[1]]))[0, 0] == Fraction(1, 2)
    assert solve_rational(intmat([[0]]), intmat([[1]])) is None


def test_inertia_examples():
    assert inertia(ratmat([[1, 0], [0, 1]])) == (2, 0, 0)
    assert inertia(ratmat([[0, 1], [1, 0]])) == (1, 1, 0)
    assert inertia(ratmat([[0, 0], [0, 0]])) == (0, 0, 2)
    with pytest.raises(NotSymmetric):
        inertia(ratmat([[0, 1], [2, 0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.data())
def test_inertia_congruence_invariant(n, data):
    Q = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            v = data.draw(st.integers(-3, 3))
            Q[i][j] = Q[j][i] = v
    G = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    for _ in range(5):
        i = data.draw(st.integers(0, n - 1))
        j = data.draw(st.integers(0, n - 1))
        if i == j:
            continue
        c = data.draw(st.integers(-2, 2))
        for k in range(n):
            G[i][k] += c * G[j][k]
    Qm, Gm = ratmat(Q), ratmat(G)
    assert inertia(Qm) == inertia(Gm.T @ Qm @ Gm)
