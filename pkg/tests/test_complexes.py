import numpy as np
import pytest

from torsionlab.complexes import (
    ChainMap,
    SignedComplex,
    alpha_n,
    beta,
    direct_sum,
    dual_complex,
    elementary_complex,
    epsilon,
    euler_char,
    find_homotopy,
    homology_ranks,
    homotopy_perturb,
    identity_map,
    is_acyclic,
    mapping_cone,
    single,
    suspension,
    zero_complex,
)
from torsionlab.errors import ShapeMismatch
from torsionlab.matrices import eye, intmat, zeros


def test_constructor_rejects_nonsquaring_differential():
    with pytest.raises(ShapeMismatch):
        SignedComplex((1, 1, 1), (intmat([[1]]), intmat([[1]])))


def test_euler_char():
    assert euler_char(single(1, 0)) == 1
    assert euler_char(elementary_complex(intmat([[1]]), 0)) == 0
    C = SignedComplex((1, 2, 2, 2, 1),
                      [zeros(1, 2), zeros(2, 2), zeros(2, 2), zeros(2, 1)])
    assert euler_char(C) == 0  # 1 - 2 + 2 - 2 + 1


def test_suspension():
    C = single(1, 0, eta=0)
    S = suspension(C)
    assert S.ranks == (0, 1)
    assert S.eta == 0
    assert suspension(single(1, 0, eta=1)).eta == 1  # -1 = 1 in Z/2
    D = SignedComplex((1, 2), [zeros(1, 2)])
    assert euler_char(suspension(D)) == -euler_char(D)


def test_epsilon():
    assert epsilon(1, 1) == 1
    assert epsilon(2, 3) == 0
    assert epsilon(3, 5) == 1


def test_beta():
    assert beta(single(1, 0), single(1, 0)) == 0
    assert beta(single(1, 2), single(1, 0)) == 1
    assert beta(single(3, 1), single(3, 1)) == 0


def test_direct_sum_sign():
    C = single(1, 1)
    D = single(1, 0)
    # eta = 0 + 0 - 0 + rank(C_odd) * chi(D) = 1
    assert direct_sum(C, D).eta == 1
    Z = zero_complex()
    assert direct_sum(C, Z).eta == C.eta
    assert direct_sum(C, Z).ranks[1] == 1
    E = SignedComplex((2, 1), [zeros(2, 1)], eta=1)
    assert euler_char(direct_sum(C, E)) == euler_char(C) + euler_char(E)


def test_direct_sum_associative_sign():
    A = SignedComplex((1, 2), [zeros(1, 2)], eta=1)
    B = SignedComplex((2, 1, 1), [zeros(2, 1), zeros(1, 1)], eta=0)
    E = SignedComplex((1, 1), [intmat([[1]])], eta=1)
    lhs = direct_sum(direct_sum(A, B), E)
    rhs = direct_sum(A, direct_sum(B, E))
    assert lhs.data_equal(rhs)


def test_mapping_cone_of_identity():
    C = single(1, 0)
    cone = mapping_cone(identity_map(C))
    assert cone.ranks == (1, 1)
    assert cone.d(1)[0, 0] == 1
    assert is_acyclic(cone)


def test_mapping_cone_of_zero_map_is_suspension_shape():
    C = SignedComplex((2, 1), [zeros(2, 1)])
    f = ChainMap(C, zero_complex(), [zeros(0, 2), zeros(0, 1)])
    cone = mapping_cone(f)
    assert cone.ranks == (0, 2, 1)


def test_mapping_cone_squares_to_zero():
    # Random-ish chain map: inclusion into a sum.
    C = elementary_complex(intmat([[1, 1], [0, 1]]), 1)
    D = direct_sum(C, single(2, 1))
    mats = [np.vstack([eye(C.rank(r)), zeros(D.rank(r) - C.rank(r), C.rank(r))])
            if C.rank(r) else zeros(D.rank(r), 0)
            for r in range(C.top_degree + 1)]
    f = ChainMap(C, D, mats)
    cone = mapping_cone(f)  # constructor validates d*d = 0
    assert cone.rank(2) == D.rank(2) + C.rank(1)


def test_dual_complex_elementary():
    C = elementary_complex(intmat([[1]]), 0)
    Cd = dual_complex(C, 1)
    assert Cd.ranks == (1, 1)
    assert Cd.d(1)[0, 0] == -1


def test_dual_complex_sign_contribution():
    # C concentrated in degree 2k, rank m, n = 4k: alpha contributes k*m.
    m, k = 3, 1
    C = single(m, 2 * k)
    Cd = dual_complex(C, 4 * k)
    assert Cd.eta == (C.eta + k * m) % 2


def test_double_dual_data():
    C = elementary_complex(intmat([[2]]), 0)  # not acyclic, fine for duality
    n = 3
    Cdd = dual_complex(dual_complex(C, n), n)
    assert Cdd.ranks == C.ranks + (0,) * (n - C.top_degree)
    for r in range(1, n + 1):
        assert np.array_equal(Cdd.d(r), C.d(r))


def test_alpha_n():
    assert alpha_n(single(2, 2), 4) == 0
    assert alpha_n(single(1, 2), 0) == 1
    assert alpha_n(zero_complex(), 7) == 0


def test_find_homotopy_zero_and_constructed():
    C = elementary_complex(intmat([[1]]), 0)
    f = identity_map(C)
    g = find_homotopy(f, f)
    assert g is not None
    assert all(np.all(m == 0) for m in g.mats)

    from torsionlab.complexes import ChainHomotopy
    g0 = ChainHomotopy(C, C, [intmat([[5]]), zeros(0, 1)])
    f2 = homotopy_perturb(f, g0)
    g = find_homotopy(f, f2)
    assert g is not None
    # Verify f - f2 = dg + gd.
    for r in range(C.top_degree + 1):
        lhs = f.mat(r) - f2.mat(r)
        rhs = C.d(r + 1) @ g.mat(r) + g.mat(r - 1) @ C.d(r)
        assert np.array_equal(lhs, rhs)


def test_find_homotopy_absent():
    C = single(1, 0)
    f = identity_map(C)
    z = ChainMap(C, C, [zeros(1, 1)])
    assert find_homotopy(f, z) is None


def test_homology_ranks():
    assert homology_ranks(single(1, 0)) == [(1, ())]
    assert homology_ranks(elementary_complex(intmat([[1]]), 0)) == [(0, ()), (0, ())]
    C = SignedComplex((1, 1), [intmat([[2]])])
    assert homology_ranks(C) == [(0, (2,)), (0, ())]
    assert not is_acyclic(C)
    assert is_acyclic(mapping_cone(identity_map(C)))
