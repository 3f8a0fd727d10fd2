import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from derham import generate as gen
from derham import normed_space as ns
from derham import rigidity as rg
from derham.subspace import Subspace

SQRT2 = math.sqrt(2)


def sub(*cols, n=4):
    e = np.eye(n)
    return Subspace(e[:, list(cols)])


def rotation_pair(theta1, theta2=None):
    """R^4 = A + Abar (coordinate planes) and B + Bbar (rotated by theta in planes 13 and 24)."""
    theta2 = theta1 if theta2 is None else theta2
    c1, s1, c2, s2 = math.cos(theta1), math.sin(theta1), math.cos(theta2), math.sin(theta2)
    b = np.array([[c1, 0], [0, c2], [s1, 0], [0, s2]])
    bb = np.array([[-s1, 0], [0, -s2], [c1, 0], [0, c2]])
    return rg.ProjectionPair(ns.euclidean(4), sub(0, 1), sub(2, 3), Subspace(b), Subspace(bb))


def planar(theta):
    e = np.eye(2)
    b = Subspace(np.array([[math.cos(theta)], [math.sin(theta)]]))
    bb = Subspace(np.array([[-math.sin(theta)], [math.cos(theta)]]))
    return rg.ProjectionPair(ns.euclidean(2), Subspace(e[:, :1]), Subspace(e[:, 1:]), b, bb)


def test_defect_of_gram_space_is_one():
    rep = rg.defect(ns.gram([[2.0, 0.3], [0.3, 1.0]]))
    assert 1.0 <= rep.m_value <= 1 + 1e-9


def test_defect_of_square_and_diamond():
    for space, x, y in [(ns.p_norm("inf", 2), [1, 1], [1, -1]), (ns.p_norm(1, 2), [1, 0], [0, 1])]:
        rep = rg.defect(space)
        assert rep.m_value == pytest.approx(SQRT2, abs=1e-9)
        assert rep.global_certified
        assert float(rg.defect_ratio(space, x, y)) == pytest.approx(SQRT2, abs=1e-15)
        assert float(rg.defect_ratio(space, *rep.extremal_pair)) == pytest.approx(rep.m_value, abs=1e-9)


@pytest.mark.parametrize("p", [1.5, 3, 4])
@pytest.mark.parametrize("d", [2, 3])
def test_defect_of_lp_matches_closed_form(p, d):
    # the l_p parallelogram constant is 2^|1/p - 1/2| in every dimension >= 2
    rep = rg.defect(ns.p_norm(p, d))
    assert rep.m_value == pytest.approx(2 ** abs(1 / p - 0.5), abs=1e-6)
    assert rep.m_value > 1 + 1e-3


def test_defect_exceeds_one_for_polyhedral_products():
    for space in (ns.p_norm(1, 3), ns.p_norm("inf", 4), gen.product_norm(["linf2", "l22"])[0]):
        assert rg.defect(space).m_value > 1 + 1e-3


def test_defect_scaling_invariance():
    rng = np.random.default_rng(2)
    space = ns.p_norm(3, 2)
    x, y = rng.standard_normal((2, 100, 2))
    for c in (1e-3, 7.0):
        np.testing.assert_allclose(rg.defect_ratio(space, c * x, c * y), rg.defect_ratio(space, x, y), rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_universal_bound(seed):
    space, _ = gen.random_product_norm(seed)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 2000, space.dim))
    assert np.max(rg.defect_ratio(space, x, y)) <= SQRT2 + 1e-12


def test_rectangularity_single_block():
    space = ns.product([ns.p_norm("inf", 2), ns.p_norm("inf", 2)])
    pair = ([1, 1, 0, 0], [1, -1, 0, 0])
    rep = rg.extremal_rectangularity(space, sub(0, 1), sub(2, 3), pair, m_value=SQRT2)
    assert rep.passed and rep.ratios[1] is None


def test_rectangularity_mixed_blocks():
    space = ns.product([ns.p_norm("inf", 2), ns.p_norm("inf", 2)])
    pair = ([1, 1, 1, 1], [1, -1, 1, -1])
    rep = rg.extremal_rectangularity(space, sub(0, 1), sub(2, 3), pair, m_value=SQRT2)
    assert rep.passed
    assert rep.ratios == pytest.approx([SQRT2, SQRT2], abs=1e-12)


def test_rectangularity_euclidean_always_passes():
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal((2, 4))
    rep = rg.extremal_rectangularity(ns.euclidean(4), sub(0, 1), sub(2, 3), (x, y), m_value=1.0)
    assert rep.passed


def test_rectangularity_refuses_non_extremal_pair():
    space = ns.product([ns.p_norm("inf", 2), ns.p_norm("inf", 2)])
    rep = rg.extremal_rectangularity(space, sub(0, 1), sub(2, 3), ([1, 0, 0, 0], [1, 0, 0, 0]), m_value=SQRT2)
    assert rep.refused


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4, math.pi / 3])
def test_planar_eigenvalue(theta):
    rep = rg.composed_projection_eigen(planar(theta))
    assert rep.lambda_ == pytest.approx(math.cos(theta) ** 2, abs=1e-8)
    assert rep.norm_identity_residual <= 1e-8 and rep.in_open_interval


def test_rotated_planes_have_scalar_q():
    pp = rotation_pair(math.pi / 4)
    np.testing.assert_allclose(pp.q_matrix(), 0.5 * np.eye(2), atol=1e-15)
    rep = rg.composed_projection_eigen(pp)
    assert rep.lambda_ == pytest.approx(0.5, abs=1e-12)


def test_equal_splittings_are_refused():
    e = np.eye(2)
    pp = rg.ProjectionPair(ns.euclidean(2), Subspace(e[:, :1]), Subspace(e[:, 1:]), Subspace(e[:, :1]),
                           Subspace(e[:, 1:]))
    with pytest.raises(rg.RefusalError):
        rg.composed_projection_eigen(pp)


def test_non_product_splitting_refused():
    e = np.eye(2)
    with pytest.raises(rg.RefusalError):
        rg.ProjectionPair(ns.p_norm("inf", 2), Subspace(e[:, :1]), Subspace(e[:, 1:]),
                          Subspace(e[:, :1]), Subspace(e[:, 1:]))


@pytest.mark.parametrize("seed", range(8))
def test_variational_value_matches_algebra(seed):
    space, a, abar, b, bbar = gen.rotated_euclidean_pair(4 if seed % 2 else 6, seed)
    rep = rg.composed_projection_eigen(rg.ProjectionPair(space, a, abar, b, bbar))
    assert rep.lambda_ == pytest.approx(rep.algebraic_top, abs=1e-8)
    assert 0 < rep.lambda_ < 1


def test_unique_half():
    rep = rg.check_lemma_unique(rotation_pair(math.pi / 4), samples=512)
    assert rep.passed and rep.s == pytest.approx(1.0)
    assert rep.identity_residual <= 1e-8 and rep.loewner_deviation <= 1e-6


def test_unique_three_quarters():
    rep = rg.check_lemma_unique(rotation_pair(math.pi / 6), samples=512)
    assert rep.passed and rep.s == pytest.approx(1 / math.sqrt(3))
    assert rep.isometry_residual <= 1e-8 and rep.product_identity_residual <= 1e-8


def test_unique_refuses_non_scalar_q():
    rep = rg.check_lemma_unique(rotation_pair(math.pi / 6, math.pi / 4))
    assert rep.refused


def test_unique_l4_violation():
    l4 = ns.product([ns.p_norm(4, 2), ns.p_norm(4, 2)])
    b = np.vstack([np.eye(2), np.eye(2)])
    bb = np.vstack([-np.eye(2), np.eye(2)])
    pp = rg.ProjectionPair(l4, sub(0, 1), sub(2, 3), Subspace(b), Subspace(bb), verify=False)
    rep = rg.check_lemma_unique(pp, samples=512)
    assert not rep.passed and not rep.refused
    assert rep.identity_residual > 1e-3


def test_strike_on_rotated_coordinates():
    v = rg.check_strike(rotation_pair(math.pi / 4), starts=64)
    assert v.verdict == "euclidean_confirmed"
    assert v.m_value <= 1 + 1e-6 and v.loewner_deviation <= 1e-6


def test_strike_refuses_line_products():
    space = ns.product([ns.p_norm("inf", 1)] * 4)
    decs = rg.candidate_decompositions(space)
    assert len(decs) == 7
    for a, abar in decs:
        for b, bbar in decs:
            with pytest.raises(rg.RefusalError):
                rg.check_strike(rg.ProjectionPair(space, a, abar, b, bbar))


def test_strike_on_random_gram_pairs():
    for seed in range(3):
        space, a, abar, b, bbar = gen.rotated_euclidean_pair(4, seed)
        assert rg.check_strike(rg.ProjectionPair(space, a, abar, b, bbar), starts=64).verdict == \
            "euclidean_confirmed"


def test_square_pair_doubles_dimension():
    sq = rg.square_pair(rotation_pair(math.pi / 4))
    assert sq.space.dim == 8 and sq.a.dim == 4


def test_maininter_equal_splittings():
    pp = rg.ProjectionPair(ns.euclidean(4), sub(0, 1), sub(2, 3), sub(0, 1), sub(2, 3))
    rep = rg.check_maininter_unbound(pp.space, pp)
    assert rep.passed and rep.intersection.dim == 2


def test_maininter_four_lines():
    space = ns.product([ns.p_norm("inf", 1)] * 4)
    pp = rg.ProjectionPair(space, sub(0, 1), sub(2, 3), sub(0, 2), sub(1, 3))
    rep = rg.check_maininter_unbound(space, pp)
    assert rep.passed and rep.intersection.dim == 1
    assert rep.intersection.contains([1, 0, 0, 0])
    assert rep.complement.contains([0, 0, 1, 0])


def test_maininter_transversal():
    pp = rotation_pair(math.pi / 3)
    rep = rg.check_maininter_unbound(pp.space, pp)
    assert rep.passed and rep.intersection.dim == 0 and rep.unbound_case
