"""Based signed chain complexes over Z and their structural operations.

A signed complex is a finite, positive chain complex of based free
Z-modules together with a sign eta in K1(Z) = Z/2.  The sign bookkeeping
(epsilon, beta, alpha and the direct-sum / suspension / mapping-cone /
dual rules) is what makes torsion additive without quotienting by +-1.

Sign formulas are evaluated in Z/2, where every "-" is a "+"; the
formulas are kept verbatim in comments for auditability.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeMismatch
from .matrices import (
    IntMatrix,
    eye,
    frozen,
    intmat,
    kernel_basis,
    snf,
    solve_integral,
    zeros,
)
from .errors import NoIntegerSolution


def _as_mat(m) -> IntMatrix:
    if isinstance(m, np.ndarray) and m.dtype == object:
        out = m.copy()
        out.setflags(write=False)
        return out
    return intmat(m)


class SignedComplex:
    """Finite based free Z-chain complex with a sign eta in Z/2.

    ranks[r] is the rank of C_r for r = 0..top_degree; diffs[r-1] is the
    differential d_r : C_r -> C_{r-1}.  Constructors enforce d o d = 0.
    Values are immutable after construction.
    """

    __slots__ = ("ranks", "diffs", "eta")

    def __init__(self, ranks: Sequence[int], diffs: Sequence, eta: int = 0,
                 validate: bool = True):
        self.ranks = tuple(int(r) for r in ranks)
        if not self.ranks:
            self.ranks = (0,)
        if any(r < 0 for r in self.ranks):
            raise ShapeMismatch("negative rank")
        mats = [_as_mat(d) for d in diffs]
        if len(mats) != len(self.ranks) - 1:
            raise ShapeMismatch(
                f"{len(self.ranks)} degrees need {len(self.ranks) - 1} differentials,"
                f" got {len(mats)}")
        self.diffs = tuple(mats)
        self.eta = int(eta) % 2
        if validate:
            for r in range(1, len(self.ranks)):
                d = self.diffs[r - 1]
                if d.shape != (self.ranks[r - 1], self.ranks[r]):
                    raise ShapeMismatch(
                        f"d_{r} has shape {d.shape}, expected "
                        f"({self.ranks[r - 1]}, {self.ranks[r]})")
            for r in range(2, len(self.ranks)):
                prod = self.diffs[r - 2] @ self.diffs[r - 1]
                if prod.size and np.any(prod != 0):
                    raise ShapeMismatch(f"d_{r-1} d_{r} != 0")

    @property
    def top_degree(self) -> int:
        return len(self.ranks) - 1

    def rank(self, r: int) -> int:
        if 0 <= r <= self.top_degree:
            return self.ranks[r]
        return 0

    def d(self, r: int) -> IntMatrix:
        """Differential d_r : C_r -> C_{r-1}, zero outside 1..top_degree."""
        if 1 <= r <= self.top_degree:
            return self.diffs[r - 1]
        return zeros(self.rank(r - 1), self.rank(r))

    def with_eta(self, eta: int) -> "SignedComplex":
        return SignedComplex(self.ranks, self.diffs, eta, validate=False)

    def data_equal(self, other: "SignedComplex") -> bool:
        """Exact equality of ranks, differentials and sign."""
        return (self.ranks == other.ranks and self.eta == other.eta
                and all(np.array_equal(a, b)
                        for a, b in zip(self.diffs, other.diffs)))

    def __repr__(self):
        return f"SignedComplex(ranks={self.ranks}, eta={self.eta})"


class ChainMap:
    """Degree-wise matrices f_r : C_r -> D_r commuting with differentials."""

    __slots__ = ("source", "target", "mats")

    def __init__(self, source: SignedComplex, target: SignedComplex,
                 mats: Sequence, validate: bool = True):
        self.source = source
        self.target = target
        ms = [_as_mat(m) for m in mats]
        top = max(source.top_degree, target.top_degree)
        while len(ms) <= top:
            r = len(ms)
            ms.append(zeros(target.rank(r), source.rank(r)))
        self.mats = tuple(ms)
        if validate:
            for r, m in enumerate(self.mats):
                if m.shape != (target.rank(r), source.rank(r)):
                    raise ShapeMismatch(
                        f"f_{r} has shape {m.shape}, expected "
                        f"({target.rank(r)}, {source.rank(r)})")
            for r in range(1, top + 1):
                lhs = target.d(r) @ self.mat(r)
                rhs = self.mat(r - 1) @ source.d(r)
                if lhs.size and not np.array_equal(lhs, rhs):
                    raise ShapeMismatch(f"not a chain map in degree {r}")

    def mat(self, r: int) -> IntMatrix:
        if 0 <= r < len(self.mats):
            return self.mats[r]
        return zeros(self.target.rank(r), self.source.rank(r))

    def compose(self, other: "ChainMap") -> "ChainMap":
        """self o other (other is applied first)."""
        if other.target is not self.source and other.target.ranks != self.source.ranks:
            raise ShapeMismatch("composition source/target mismatch")
        top = max(self.source.top_degree, self.target.top_degree,
                  other.source.top_degree)
        mats = [self.mat(r) @ other.mat(r) for r in range(top + 1)]
        return ChainMap(other.source, self.target, mats, validate=False)

    def __add__(self, other: "ChainMap") -> "ChainMap":
        mats = [self.mat(r) + other.mat(r) for r in range(len(self.mats))]
        return ChainMap(self.source, self.target, mats, validate=False)

    def __neg__(self) -> "ChainMap":
        return ChainMap(self.source, self.target,
                        [-m for m in self.mats], validate=False)

    def __repr__(self):
        return f"ChainMap({self.source!r} -> {self.target!r})"


class ChainHomotopy:
    """Degree-raising maps g_r : C_r -> D_{r+1}."""

    __slots__ = ("source", "target", "mats")

    def __init__(self, source: SignedComplex, target: SignedComplex,
                 mats: Sequence):
        self.source = source
        self.target = target
        ms = [_as_mat(m) for m in mats]
        while len(ms) <= source.top_degree:
            r = len(ms)
            ms.append(zeros(target.rank(r + 1), source.rank(r)))
        self.mats = tuple(ms)
        for r, m in enumerate(self.mats):
            if m.shape != (target.rank(r + 1), source.rank(r)):
                raise ShapeMismatch(
                    f"g_{r} has shape {m.shape}, expected "
                    f"({target.rank(r + 1)}, {source.rank(r)})")

    def mat(self, r: int) -> IntMatrix:
        if 0 <= r < len(self.mats):
            return self.mats[r]
        return zeros(self.target.rank(r + 1), self.source.rank(r))


def identity_map(C: SignedComplex) -> ChainMap:
    return ChainMap(C, C, [eye(C.rank(r)) for r in range(C.top_degree + 1)],
                    validate=False)


def zero_complex() -> SignedComplex:
    return SignedComplex((0,), (), 0, validate=False)


def single(rank: int = 1, degree: int = 0, eta: int = 0) -> SignedComplex:
    """Complex with one free module in one degree, zero elsewhere."""
    ranks = [0] * degree + [rank]
    diffs = [zeros(ranks[r - 1], ranks[r]) for r in range(1, len(ranks))]
    return SignedComplex(ranks, diffs, eta, validate=False)


def elementary_complex(U: IntMatrix, bottom: int, eta: int = 0) -> SignedComplex:
    """Contractible complex U : C_{bottom+1} -> C_{bottom} in two adjacent
    degrees, with U unimodular."""
    n = U.shape[0]
    if U.shape != (n, n):
        raise ShapeMismatch("elementary block must be square")
    ranks = [0] * bottom + [n, n]
    diffs = [zeros(ranks[r - 1], ranks[r]) for r in range(1, bottom + 1)] + [U]
    return SignedComplex(ranks, diffs, eta)


# ---------------------------------------------------------------------------
# Rank-level sign bookkeeping.  The same formulas serve ordinary complexes
# (sizes = ranks) and the derived level (sizes = Euler characteristics).

def epsilon(m: int, n: int) -> int:
    # epsilon(M, N) = rank(M) * rank(N)  mod 2
    return (m * n) % 2


def chi_sizes(sizes: Sequence[int]) -> int:
    return sum((-1) ** r * v for r, v in enumerate(sizes))


def odd_size(sizes: Sequence[int]) -> int:
    return sum(sizes[1::2])


def beta_sizes(c: Sequence[int], d: Sequence[int]) -> int:
    # beta(C,D) = sum_{i>j} (eps(C_2i, D_2j) - eps(C_{2i+1}, D_{2j+1}))
    def get(seq, k):
        return seq[k] if 0 <= k < len(seq) else 0

    top = max(len(c), len(d))
    total = 0
    for i in range(top):
        for j in range(i):
            total += get(c, 2 * i) * get(d, 2 * j)
            total += get(c, 2 * i + 1) * get(d, 2 * j + 1)
    return total % 2


def alpha_sizes(sizes: Sequence[int], n: int) -> int:
    # alpha_n(C) = sum_{r = n+2, n+3 mod 4} rank(C^r)
    return sum(v for r, v in enumerate(sizes)
               if r % 4 in ((n + 2) % 4, (n + 3) % 4)) % 2


def eta_direct_sum(sizes_c: Sequence[int], eta_c: int,
                   sizes_d: Sequence[int], eta_d: int) -> int:
    # eta_{C + D} = eta_C + eta_D - beta(C,D) + rank(C_odd) * chi(D)
    return (eta_c + eta_d + beta_sizes(sizes_c, sizes_d)
            + odd_size(sizes_c) * chi_sizes(sizes_d)) % 2


def eta_iterated_cone(size_lists: Sequence[Sequence[int]],
                      etas: Sequence[int]) -> int:
    """Sign of G_0 + S(G_1 + S(G_2 + ... + S G_k)...) from sizes alone."""
    if not size_lists:
        return 0
    cur = list(size_lists[-1])
    eta = etas[-1] % 2
    for sizes, e in zip(reversed(size_lists[:-1]), reversed(etas[:-1])):
        susp = [0] + cur  # eta_{SC} = -eta_C, trivial in Z/2
        eta = eta_direct_sum(sizes, e, susp, eta)
        cur = [a + b for a, b in
               zip(list(sizes) + [0] * max(0, len(susp) - len(sizes)),
                   susp + [0] * max(0, len(sizes) - len(susp)))]
    return eta


# ---------------------------------------------------------------------------
# Structural operations.

def euler_char(C: SignedComplex) -> int:
    # chi(C) = sum (-1)^r rank C_r
    return chi_sizes(C.ranks)


def suspension(C: SignedComplex) -> SignedComplex:
    """(SC)_r = C_{r-1}; eta_{SC} = -eta_C (equal to eta_C in Z/2)."""
    ranks = (0,) + C.ranks
    diffs = (zeros(0, C.rank(0)),) + C.diffs
    return SignedComplex(ranks, diffs, C.eta, validate=False)


def beta(C: SignedComplex, D: SignedComplex) -> int:
    return beta_sizes(C.ranks, D.ranks)


def alpha_n(C: SignedComplex, n: int) -> int:
    return alpha_sizes(C.ranks, n)


def _block2(a: IntMatrix, b: IntMatrix, c: IntMatrix, d: IntMatrix) -> IntMatrix:
    """[[a, b], [c, d]] assembled safely for zero-size blocks."""
    m0, n0 = a.shape
    m1, n1 = d.shape
    out = np.zeros((m0 + m1, n0 + n1), dtype=object)
    if a.size:
        out[:m0, :n0] = a
    if b.size:
        out[:m0, n0:] = b
    if c.size:
        out[m0:, :n0] = c
    if d.size:
        out[m0:, n0:] = d
    return frozen(out)


def direct_sum(C: SignedComplex, D: SignedComplex) -> SignedComplex:
    """Degreewise block sum with the eta_{C+D} sign rule."""
    top = max(C.top_degree, D.top_degree)
    ranks = [C.rank(r) + D.rank(r) for r in range(top + 1)]
    diffs = [
        _block2(C.d(r), zeros(C.rank(r - 1), D.rank(r)),
                zeros(D.rank(r - 1), C.rank(r)), D.d(r))
        for r in range(1, top + 1)
    ]
    eta = eta_direct_sum(C.ranks, C.eta, D.ranks, D.eta)
    return SignedComplex(ranks, diffs, eta, validate=False)


def direct_sum_map(f: ChainMap, g: ChainMap) -> ChainMap:
    """f + g : source(f) + source(g) -> target(f) + target(g)."""
    src = direct_sum(f.source, g.source)
    tgt = direct_sum(f.target, g.target)
    top = src.top_degree
    mats = [
        _block2(f.mat(r), zeros(f.target.rank(r), g.source.rank(r)),
                zeros(g.target.rank(r), f.source.rank(r)), g.mat(r))
        for r in range(top + 1)
    ]
    return ChainMap(src, tgt, mats, validate=False)


def mapping_cone(f: ChainMap) -> SignedComplex:
    """C(f)_r = D_r + C_{r-1} with the twisted differential
    [[d_D, (-)^{r-1} f], [0, d_C]] and sign eta_{D + SC}."""
    C, D = f.source, f.target
    top = max(D.top_degree, C.top_degree + 1)
    ranks = [D.rank(r) + C.rank(r - 1) for r in range(top + 1)]
    diffs = []
    for r in range(1, top + 1):
        sign = 1 if (r - 1) % 2 == 0 else -1
        diffs.append(_block2(D.d(r), sign * f.mat(r - 1),
                             zeros(C.rank(r - 2), D.rank(r)), C.d(r - 1)))
    # eta_{C(f)} = eta_{D + SC} = eta_D - eta_C - beta(D, SC) + eps(D_odd, chi(SC))
    sc_ranks = (0,) + C.ranks
    eta = eta_direct_sum(D.ranks, D.eta, sc_ranks, C.eta)
    return SignedComplex(ranks, diffs, eta, validate=False)


def dual_complex(C: SignedComplex, n: int) -> SignedComplex:
    """n-dual complex: (C^{n-*})_r = (C_{n-r})^*, differential
    d = (-1)^r d*, sign eta_C + beta(C,C) + alpha_n(C)."""
    if n < C.top_degree:
        raise ShapeMismatch(
            f"dual dimension {n} below top degree {C.top_degree}")
    ranks = [C.rank(n - r) for r in range(n + 1)]
    diffs = []
    for r in range(1, n + 1):
        sign = 1 if r % 2 == 0 else -1
        # d : (C_{n-r})^* -> (C_{n-r+1})^* is the transpose of d_{n-r+1}.
        diffs.append(frozen(sign * C.d(n - r + 1).T))
    eta = (C.eta + beta(C, C) + alpha_n(C, n)) % 2
    return SignedComplex(ranks, diffs, eta, validate=False)


def dual_chain_map(f: ChainMap, n: int) -> ChainMap:
    """n-dual of a chain map: f^{n-*} : D^{n-*} -> C^{n-*}."""
    src = dual_complex(f.target, n)
    tgt = dual_complex(f.source, n)
    mats = [frozen(f.mat(n - r).T.copy()) for r in range(n + 1)]
    return ChainMap(src, tgt, mats, validate=False)


def find_homotopy(f: ChainMap, f2: ChainMap) -> Optional[ChainHomotopy]:
    """Solve f - f2 = d g + g d over Z; None when no homotopy exists."""
    if f.source.ranks != f2.source.ranks or f.target.ranks != f2.target.ranks:
        raise ShapeMismatch("homotopy endpoints must share source and target")
    C, D = f.source, f.target
    top = max(C.top_degree, D.top_degree)
    # Unknown blocks g_r : C_r -> D_{r+1}, flattened row-major.
    sizes = [(D.rank(r + 1), C.rank(r)) for r in range(top + 1)]
    offs = []
    total = 0
    for (m, n_) in sizes:
        offs.append(total)
        total += m * n_
    rows_list = []
    rhs_list = []
    for r in range(top + 1):
        m, n_ = D.rank(r), C.rank(r)
        if m * n_ == 0:
            continue
        block = np.zeros((m * n_, total), dtype=object)
        mr, nr = sizes[r]
        if mr * nr:
            # vec(d_{r+1} g_r) = (d_{r+1} kron I) vec(g_r)
            block[:, offs[r]:offs[r] + mr * nr] = np.kron(D.d(r + 1), eye(n_))
        if r >= 1:
            mp, np_ = sizes[r - 1]
            if mp * np_:
                # vec(g_{r-1} d_r) = (I kron d_r^T) vec(g_{r-1})
                block[:, offs[r - 1]:offs[r - 1] + mp * np_] = np.kron(
                    eye(m), frozen(C.d(r).T.copy()))
        rows_list.append(block)
        rhs_list.append((f.mat(r) - f2.mat(r)).reshape(m * n_, 1))
    if not rows_list:
        return ChainHomotopy(C, D, [])
    A = frozen(np.vstack(rows_list))
    b = frozen(np.vstack(rhs_list))
    try:
        x = solve_integral(A, b)
    except NoIntegerSolution:
        return None
    mats = []
    for r in range(top + 1):
        m, n_ = sizes[r]
        mats.append(frozen(x[offs[r]:offs[r] + m * n_, 0].reshape(m, n_)))
    return ChainHomotopy(C, D, mats)


def homotopy_perturb(f: ChainMap, g: ChainHomotopy) -> ChainMap:
    """f + d g + g d, a chain map homotopic to f."""
    C, D = f.source, f.target
    mats = [
        f.mat(r) + D.d(r + 1) @ g.mat(r) + g.mat(r - 1) @ C.d(r)
        for r in range(len(f.mats))
    ]
    return ChainMap(C, D, mats, validate=False)


def homology_ranks(C: SignedComplex) -> List[Tuple[int, Tuple[int, ...]]]:
    """Per degree: (free rank of H_r, torsion invariant factors > 1)."""
    invs = {}
    for r in range(1, C.top_degree + 1):
        S, _, _ = snf(C.d(r))
        invs[r] = [int(S[i, i]) for i in range(min(S.shape)) if S[i, i]]
    invs[0] = []
    invs[C.top_degree + 1] = []
    out = []
    for r in range(C.top_degree + 1):
        free = C.rank(r) - len(invs[r]) - len(invs[r + 1])
        torsion = tuple(s for s in invs[r + 1] if s > 1)
        out.append((free, torsion))
    return out


def is_acyclic(C: SignedComplex) -> bool:
    return all(free == 0 and not tor for free, tor in homology_ranks(C))
