"""Symmetric Poincare complexes over Z: absolute torsion, signatures,
and the mod-4 / mod-8 congruence checks.

Only the duality map phi0 is stored; the invariants computed here
depend on nothing else.  Symmetry of the middle-cohomology pairing is
asserted where it is used (signature) instead of being witnessed by
higher structure maps.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .complexes import (
    ChainMap,
    SignedComplex,
    alpha_n,
    beta,
    direct_sum,
    dual_complex,
    euler_char,
    single,
)
from .errors import (
    DimensionNotDivisibleBy4,
    InternalCheckFailed,
    NonSymmetricHomologyPairing,
    NotAUnit,
    NotEven,
    NotSymmetric,
    ShapeMismatch,
)
from .matrices import (
    IntMatrix,
    det,
    frozen,
    inertia,
    intmat,
    kernel_basis,
    rank,
    ratmat,
    unit_det,
    zeros,
)
from .torsion import tau_iso, tau_new_map


class UnimodularForm:
    """Symmetric bilinear form on Z^n with determinant +-1."""

    __slots__ = ("h",)

    def __init__(self, h):
        m = h if isinstance(h, np.ndarray) else intmat(h)
        if m.shape[0] != m.shape[1]:
            raise ShapeMismatch("form matrix must be square")
        if not np.array_equal(m, m.T):
            raise NotSymmetric("form matrix must be symmetric")
        if abs(det(m)) != 1:
            raise NotAUnit("form must be unimodular")
        self.h = frozen(m.copy())

    @property
    def rank(self) -> int:
        return self.h.shape[0]

    @property
    def det(self) -> int:
        return det(self.h)

    def signature(self) -> int:
        p, n, _ = inertia(ratmat(self.h.tolist()))
        return p - n

    def is_even(self) -> bool:
        return all(self.h[i, i] % 2 == 0 for i in range(self.rank))


def hyperbolic_form() -> UnimodularForm:
    return UnimodularForm([[0, 1], [1, 0]])


def e8_form() -> UnimodularForm:
    """Gram matrix of the E8 root lattice: even, unimodular, signature 8."""
    edges = [(0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (1, 3)]
    g = [[0] * 8 for _ in range(8)]
    for i in range(8):
        g[i][i] = 2
    for i, j in edges:
        g[i][j] = g[j][i] = -1
    return UnimodularForm(g)


def diagonal_form(entries: Sequence[int]) -> UnimodularForm:
    g = [[0] * len(entries) for _ in range(len(entries))]
    for i, e in enumerate(entries):
        g[i][i] = e
    return UnimodularForm(g)


def _as_form(h) -> UnimodularForm:
    return h if isinstance(h, UnimodularForm) else UnimodularForm(h)


class SymmetricComplex:
    """(C, phi0) with phi0 : C^{n-*} -> C a chain equivalence.

    The constructor checks the chain-map identity, the equivalence
    property (mapping cone acyclic over Z), and chi(C) = 0 when n is
    odd.  The absolute torsion is computed once and cached; when phi0
    is a degreewise isomorphism the alternating-determinant formula is
    evaluated as an independent route and the two must agree.
    """

    __slots__ = ("C", "n", "phi0", "_tau")

    def __init__(self, C: SignedComplex, n: int, phi_mats: Sequence,
                 validate: bool = True):
        if n < C.top_degree:
            raise ShapeMismatch("formal dimension below top degree")
        if n % 2 == 1 and euler_char(C) != 0:
            raise ShapeMismatch("odd-dimensional complex must have chi = 0")
        self.C = C
        self.n = int(n)
        src = dual_complex(C, n)
        self.phi0 = ChainMap(src, C, phi_mats, validate=validate)
        self._tau: Optional[int] = None
        if validate:
            self.tau_new()  # verifies phi0 is an equivalence

    def dual(self) -> SignedComplex:
        return self.phi0.source

    def tau_new(self) -> int:
        if self._tau is None:
            t = tau_new_map(self.phi0)
            if self._is_degreewise_iso():
                # tau_new = sum (-1)^r tau(phi0_r) + beta(C,C) + alpha_n(C)
                if tau_iso(self.phi0) != t:
                    raise InternalCheckFailed(
                        "isomorphism formula disagrees with cone route")
            self._tau = t
        return self._tau

    def _is_degreewise_iso(self) -> bool:
        src, tgt = self.phi0.source, self.phi0.target
        for r in range(max(src.top_degree, tgt.top_degree) + 1):
            if src.rank(r) != tgt.rank(r):
                return False
            if src.rank(r) and abs(det(self.phi0.mat(r))) != 1:
                return False
        return True

    def __repr__(self):
        return f"SymmetricComplex(n={self.n}, ranks={self.C.ranks})"


def form_to_complex(h, k: int = 0) -> SymmetricComplex:
    """Complex concentrated in degree 2k with n = 4k and phi0 = h."""
    form = _as_form(h)
    C = single(form.rank, 2 * k)
    n = 4 * k
    mats = [zeros(C.rank(r), C.rank(n - r)) for r in range(n + 1)]
    mats[2 * k] = form.h
    return SymmetricComplex(C, n, mats)


def tau_new_symmetric(X: SymmetricComplex) -> int:
    """Absolute torsion tau_new(C, phi) = tau_new(phi0 : C^{n-*} -> C)."""
    return X.tau_new()


def negate(X: SymmetricComplex) -> SymmetricComplex:
    """-(C, phi) = (C, -phi)."""
    return SymmetricComplex(X.C, X.n, [-m for m in X.phi0.mats])


def is_round(X: SymmetricComplex) -> bool:
    return euler_char(X.C) == 0


def is_simple(X: SymmetricComplex) -> bool:
    return X.tau_new() == 0


def signature(X: SymmetricComplex) -> int:
    """Index of the middle-cohomology pairing when n = 4k, else 0.

    Representatives of H^{2k}(C; Q) are integral cocycles completing a
    basis of the coboundaries; the pairing <z_i, phi0 z_j> is formed in
    dual bases and must be exactly symmetric.
    """
    if X.n % 4 != 0:
        return 0
    mid = X.n // 2
    C = X.C
    cocycle = kernel_basis(frozen(C.d(mid + 1).T.copy()))
    cobound = frozen(C.d(mid).T.copy())
    cur = cobound
    cur_rank = rank(cur)
    chosen = []
    for idx in range(cocycle.shape[1]):
        cand = frozen(np.hstack([cur, cocycle[:, idx:idx + 1]]))
        r2 = rank(cand)
        if r2 > cur_rank:
            chosen.append(idx)
            cur, cur_rank = cand, r2
    reps = frozen(cocycle[:, chosen]) if chosen else zeros(C.rank(mid), 0)
    B = reps.T @ X.phi0.mat(mid) @ reps
    if not np.array_equal(B, B.T):
        raise NonSymmetricHomologyPairing(
            "middle-cohomology pairing is not symmetric")
    p, nneg, _ = inertia(ratmat(B.tolist()))
    return p - nneg


def check_signmod4(X: SymmetricComplex) -> dict:
    """sign(C) = 2 tau_new(C, phi) + (2k+1) chi(C)  mod 4, for n = 4k."""
    if X.n % 4 != 0:
        raise DimensionNotDivisibleBy4(f"n = {X.n}")
    k = X.n // 4
    lhs = signature(X) % 4
    rhs = (2 * X.tau_new() + (2 * k + 1) * euler_char(X.C)) % 4
    return {"lhs": lhs, "rhs": rhs, "ok": lhs == rhs}


def check_det_mod4(h) -> dict:
    """Classical congruence sign(phi) = rank(phi) + det(phi) - 1  mod 4."""
    form = _as_form(h)
    lhs = form.signature() % 4
    rhs = (form.rank + form.det - 1) % 4
    return {"lhs": lhs, "rhs": rhs, "ok": lhs == rhs}


def check_mod8_even(h) -> dict:
    """Signature of an even unimodular symmetric form is divisible by 8."""
    form = _as_form(h)
    if not form.is_even():
        raise NotEven("form has an odd diagonal entry")
    s = form.signature()
    return {"lhs": s % 8, "rhs": 0, "ok": s % 8 == 0}


def tensor_symmetric(X: SymmetricComplex, Y: SymmetricComplex) -> SymmetricComplex:
    """Tensor product of symmetric complexes.

    The underlying complex is the tensor filtration's total complex;
    phi0 is (1 x phi0_Y) o (phi0_X x 1) o theta, with theta the
    diagonal sign map from the plain dual onto the filtered dual.
    """
    from .filtered import tensor_filtered, theta_map, total_complex

    k, n = X.n, Y.n
    C, D = X.C, Y.C
    F = tensor_filtered(C, D)
    T = total_complex(F)
    theta = theta_map(F, n, check_torsion=False)
    mats = []
    for m in range(k + n + 1):
        # Stage 1 on block s: phi_X in the C coordinate.
        blocks1 = []
        blocks2 = []
        for s in range(C.top_degree + 1):
            dim_d_dual = D.rank(n - m + s)
            blocks1.append(np.kron(X.phi0.mat(s),
                                   np.identity(dim_d_dual, dtype=object)))
            blocks2.append(np.kron(np.identity(C.rank(s), dtype=object),
                                   Y.phi0.mat(m - s)))
        stage1 = _block_diag(blocks1)
        stage2 = _block_diag(blocks2)
        mats.append(stage2 @ stage1 @ theta.mat(m))
    return SymmetricComplex(T, k + n, mats)


def _block_diag(blocks) -> IntMatrix:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=object)
    i = j = 0
    for b in blocks:
        if b.size:
            out[i:i + b.shape[0], j:j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return frozen(out)
