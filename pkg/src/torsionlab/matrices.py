"""Exact dense linear algebra over Z and Q.

Matrices are numpy arrays with dtype=object holding Python ints (or
fractions.Fraction for the rational routines), so all arithmetic is
exact at arbitrary precision.  No floating point appears anywhere in
this package.

Normal forms here satisfy the stated contracts (H = U*M, S = U*M*V,
divisibility chain, unimodular transforms); pivoting order is chosen
for small intermediate entries, not for cross-implementation
canonicity.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .errors import NoIntegerSolution, NotAUnit, NotSymmetric, ShapeMismatch

IntMatrix = np.ndarray  # dtype=object, Python int entries
RatMatrix = np.ndarray  # dtype=object, Fraction entries


def intmat(rows) -> IntMatrix:
    """Build a validated integer matrix from a nested sequence.

    Rejects floats and other inexact types; numpy integers are coerced
    to Python ints so later products never overflow.
    """
    data = list(rows)
    m = len(data)
    n = len(data[0]) if m else 0
    out = np.empty((m, n), dtype=object)
    for i, row in enumerate(data):
        if len(row) != n:
            raise ShapeMismatch("ragged rows")
        for j, x in enumerate(row):
            if isinstance(x, (bool, np.bool_)):
                raise TypeError("bool entry in integer matrix")
            if not isinstance(x, (int, np.integer)):
                raise TypeError(f"non-integer entry {x!r}")
            out[i, j] = int(x)
    out.setflags(write=False)
    return out


def zeros(m: int, n: int) -> IntMatrix:
    out = np.zeros((m, n), dtype=object)
    out.setflags(write=False)
    return out


def eye(n: int) -> IntMatrix:
    out = np.zeros((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 1
    out.setflags(write=False)
    return out


def frozen(a: np.ndarray) -> np.ndarray:
    """Mark an object array immutable and return it."""
    if a.dtype != object:
        a = a.astype(object)
    a.setflags(write=False)
    return a


def ratmat(rows) -> RatMatrix:
    """Build a validated matrix of Fractions (ints are promoted)."""
    data = list(rows)
    m = len(data)
    n = len(data[0]) if m else 0
    out = np.empty((m, n), dtype=object)
    for i, row in enumerate(data):
        if len(row) != n:
            raise ShapeMismatch("ragged rows")
        for j, x in enumerate(row):
            if isinstance(x, float):
                raise TypeError("float entry in exact matrix")
            out[i, j] = Fraction(x)
    out.setflags(write=False)
    return out


def _tolists(M: np.ndarray) -> list:
    return [[int(x) for x in row] for row in M]


def hnf(M: IntMatrix) -> Tuple[IntMatrix, IntMatrix]:
    """Row Hermite normal form.

    Returns (H, U) with H = U @ M, U unimodular, H in row-echelon form
    with positive pivots and entries above each pivot reduced to
    [0, pivot).
    """
    m, n = M.shape
    A = _tolists(M)
    U = [[1 if i == j else 0 for j in range(m)] for i in range(m)]
    row = 0
    for col in range(n):
        if row >= m:
            break
        # Clear below (row, col) by gcd row operations, keeping pivots small.
        while True:
            piv = -1
            best = None
            for i in range(row, m):
                v = abs(A[i][col])
                if v and (best is None or v < best):
                    best, piv = v, i
            if piv < 0:
                break
            if piv != row:
                A[row], A[piv] = A[piv], A[row]
                U[row], U[piv] = U[piv], U[row]
            p = A[row][col]
            done = True
            for i in range(row + 1, m):
                q = A[i][col] // p
                if q:
                    Ai, Ar = A[i], A[row]
                    for j in range(n):
                        Ai[j] -= q * Ar[j]
                    Ui, Ur = U[i], U[row]
                    for j in range(m):
                        Ui[j] -= q * Ur[j]
                if A[i][col]:
                    done = False
            if done:
                break
        if piv < 0:
            continue
        if A[row][col] < 0:
            A[row] = [-x for x in A[row]]
            U[row] = [-x for x in U[row]]
        p = A[row][col]
        for i in range(row):
            q = A[i][col] // p
            if q:
                Ai, Ar = A[i], A[row]
                for j in range(n):
                    Ai[j] -= q * Ar[j]
                Ui, Ur = U[i], U[row]
                for j in range(m):
                    Ui[j] -= q * Ur[j]
        row += 1
    H = np.array(A, dtype=object).reshape(m, n)
    Um = np.array(U, dtype=object).reshape(m, m)
    return frozen(H), frozen(Um)


def snf(M: IntMatrix) -> Tuple[IntMatrix, IntMatrix, IntMatrix]:
    """Smith normal form: S = U @ M @ V diagonal with s1 | s2 | ...

    U and V are unimodular; diagonal entries are nonnegative.
    """
    m, n = M.shape
    A = _tolists(M)
    U = [[1 if i == j else 0 for j in range(m)] for i in range(m)]
    V = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    def row_op(i, q, r):  # row i -= q * row r
        Ai, Ar = A[i], A[r]
        for j in range(n):
            Ai[j] -= q * Ar[j]
        Ui, Ur = U[i], U[r]
        for j in range(m):
            Ui[j] -= q * Ur[j]

    def col_op(j, q, c):  # col j -= q * col c
        for i in range(m):
            A[i][j] -= q * A[i][c]
        for i in range(n):
            V[i][j] -= q * V[i][c]

    def swap_rows(i, r):
        A[i], A[r] = A[r], A[i]
        U[i], U[r] = U[r], U[i]

    def swap_cols(j, c):
        for row_ in A:
            row_[j], row_[c] = row_[c], row_[j]
        for row_ in V:
            row_[j], row_[c] = row_[c], row_[j]

    def clear_at(t):
        while True:
            piv = None
            best = None
            for i in range(t, m):
                Ai = A[i]
                for j in range(t, n):
                    v = abs(Ai[j])
                    if v and (best is None or v < best):
                        best, piv = v, (i, j)
            if piv is None:
                return False
            pi, pj = piv
            if pi != t:
                swap_rows(pi, t)
            if pj != t:
                swap_cols(pj, t)
            p = A[t][t]
            dirty = False
            for i in range(t + 1, m):
                q = A[i][t] // p
                if q:
                    row_op(i, q, t)
                if A[i][t]:
                    dirty = True
            for j in range(t + 1, n):
                q = A[t][j] // p
                if q:
                    col_op(j, q, t)
                if A[t][j]:
                    dirty = True
            if not dirty:
                return True

    t = 0
    while t < min(m, n):
        if not clear_at(t):
            break
        t += 1
    rank = t

    # Normalize signs.
    for i in range(rank):
        if A[i][i] < 0:
            for j in range(m):
                U[i][j] = -U[i][j]
            A[i][i] = -A[i][i]

    # Enforce the divisibility chain s_i | s_{i+1}.
    i = 0
    while i < rank - 1:
        a, b = A[i][i], A[i + 1][i + 1]
        if b % a:
            # col i += col i+1 puts b next to a, then re-clear at i.
            for r_ in range(m):
                A[r_][i] += A[r_][i + 1]
            for r_ in range(n):
                V[r_][i] += V[r_][i + 1]
            clear_at(i)
            if A[i][i] < 0:
                for j in range(m):
                    U[i][j] = -U[i][j]
                A[i][i] = -A[i][i]
            if A[i + 1][i + 1] < 0:
                for j in range(m):
                    U[i + 1][j] = -U[i + 1][j]
                A[i + 1][i + 1] = -A[i + 1][i + 1]
            i = max(i - 1, 0)
        else:
            i += 1

    S = np.array(A, dtype=object).reshape(m, n)
    Um = np.array(U, dtype=object).reshape(m, m)
    Vm = np.array(V, dtype=object).reshape(n, n)
    return frozen(S), frozen(Um), frozen(Vm)


def det(M: IntMatrix) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    m, n = M.shape
    if m != n:
        raise ShapeMismatch("determinant of non-square matrix")
    if n == 0:
        return 1
    A = _tolists(M)
    sign = 1
    prev = 1
    for k in range(n - 1):
        piv = -1
        best = None
        for i in range(k, n):
            v = abs(A[i][k])
            if v and (best is None or v < best):
                best, piv = v, i
        if piv < 0:
            return 0
        if piv != k:
            A[k], A[piv] = A[piv], A[k]
            sign = -sign
        pkk = A[k][k]
        Ak = A[k]
        for i in range(k + 1, n):
            Ai = A[i]
            aik = Ai[k]
            for j in range(k + 1, n):
                Ai[j] = (pkk * Ai[j] - aik * Ak[j]) // prev
            Ai[k] = 0
        prev = pkk
    return sign * A[n - 1][n - 1]


def unit_det(M: IntMatrix) -> int:
    """Class of det(M) in K1(Z) = Z/2: 0 for +1, 1 for -1.

    Raises NotAUnit when |det M| != 1.
    """
    d = det(M)
    if d == 1:
        return 0
    if d == -1:
        return 1
    raise NotAUnit(f"determinant {d} is not a unit of Z")


def _staircase(M: IntMatrix):
    """Decomposition M @ V = L with V unimodular and L in column
    staircase form (column j zero above its pivot row, pivot rows
    strictly increasing).  Returns (L, V, pivot_rows)."""
    H, U = hnf(frozen(M.T.copy()))
    L = frozen(H.T.copy())
    V = frozen(U.T.copy())
    pivots = []
    n = H.shape[0]
    for i in range(n):
        row = H[i]
        nz = [j for j in range(H.shape[1]) if row[j]]
        if not nz:
            break
        pivots.append(nz[0])
    return L, V, pivots


def kernel_basis(M: IntMatrix) -> IntMatrix:
    """Columns form a Z-basis of ker(M); the kernel is a direct summand."""
    L, V, pivots = _staircase(M)
    r = len(pivots)
    K = V[:, r:].copy()
    return frozen(K)


def rank(M: IntMatrix) -> int:
    return len(_staircase(M)[2])


def solve_integral(M: IntMatrix, B: IntMatrix) -> IntMatrix:
    """Solve M @ X = B over Z.

    Raises NoIntegerSolution when the system has no integral solution
    (including rationally unsolvable systems).
    """
    if M.shape[0] != B.shape[0]:
        raise ShapeMismatch(f"M has {M.shape[0]} rows, B has {B.shape[0]}")
    m, n = M.shape
    q = B.shape[1]
    L, V, pivots = _staircase(M)
    r = len(pivots)
    Y = np.zeros((n, q), dtype=object)
    for idx in range(r):
        p = pivots[idx]
        # Row p of L only touches columns <= idx.
        for c in range(q):
            acc = B[p, c]
            for j in range(idx):
                lv = L[p, j]
                if lv:
                    acc -= lv * Y[j, c]
            piv = L[p, idx]
            if acc % piv:
                raise NoIntegerSolution(f"divisibility fails at pivot row {p}")
            Y[idx, c] = acc // piv
    # Verify the remaining equations.
    if not np.array_equal(L @ Y, np.asarray(B, dtype=object)):
        raise NoIntegerSolution("system inconsistent over Q")
    return frozen(V @ Y)


def invert_unimodular(M: IntMatrix) -> IntMatrix:
    """Exact inverse of a unimodular integer matrix."""
    if M.shape[0] != M.shape[1]:
        raise ShapeMismatch("inverse of non-square matrix")
    return solve_integral(M, eye(M.shape[0]))


def solve_rational(M: IntMatrix, B: IntMatrix) -> Optional[RatMatrix]:
    """Solve M @ X = B over Q, or None if inconsistent.

    Used only as a diagnostic to distinguish Z-unsolvable from
    Q-unsolvable systems.
    """
    m, n = M.shape
    q = B.shape[1]
    A = [[Fraction(int(M[i, j])) for j in range(n)]
         + [Fraction(int(B[i, c])) for c in range(q)] for i in range(m)]
    row = 0
    pivcols = []
    for col in range(n):
        piv = next((i for i in range(row, m) if A[i][col]), None)
        if piv is None:
            continue
        A[row], A[piv] = A[piv], A[row]
        pv = A[row][col]
        A[row] = [x / pv for x in A[row]]
        for i in range(m):
            if i != row and A[i][col]:
                f = A[i][col]
                A[i] = [x - f * y for x, y in zip(A[i], A[row])]
        pivcols.append(col)
        row += 1
    for i in range(row, m):
        if any(A[i][n:]):
            if not any(A[i][:n]):
                return None
    X = np.zeros((n, q), dtype=object)
    X[:] = Fraction(0)
    for r_, col in enumerate(pivcols):
        for c in range(q):
            X[col, c] = A[r_][n + c]
    return frozen(X)


def inertia(Q: RatMatrix) -> Tuple[int, int, int]:
    """Inertia (positive, negative, zero counts) of a symmetric matrix
    over Q by symmetric Gaussian congruence.

    Uses the standard zero-diagonal fix: when Q_ii = 0 but Q_ij != 0,
    row j (and column j) is added to row i (column i) first.
    """
    m, n = Q.shape
    if m != n:
        raise NotSymmetric("inertia of non-square matrix")
    A = [[Fraction(Q[i, j]) for j in range(n)] for i in range(m)]
    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j] != A[j][i]:
                raise NotSymmetric(f"entries ({i},{j}) and ({j},{i}) differ")
    pos = neg = zero = 0
    for i in range(n):
        if A[i][i] == 0:
            j = next((j for j in range(i + 1, n) if A[j][j]), None)
            if j is not None:
                A[i], A[j] = A[j], A[i]
                for row_ in A:
                    row_[i], row_[j] = row_[j], row_[i]
            else:
                j = next((j for j in range(i + 1, n) if A[i][j]), None)
                if j is None:
                    zero += 1
                    continue
                for c in range(n):
                    A[i][c] += A[j][c]
                for r_ in range(n):
                    A[r_][i] += A[r_][j]
        a = A[i][i]
        if a > 0:
            pos += 1
        else:
            neg += 1
        for j in range(i + 1, n):
            if A[j][i]:
                f = A[j][i] / a
                for c in range(n):
                    A[j][c] -= f * A[i][c]
                for r_ in range(n):
                    A[r_][j] -= f * A[r_][i]
    return pos, neg, zero
