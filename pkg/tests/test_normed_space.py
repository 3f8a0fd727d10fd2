import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from derham import generate as gen
from derham import normed_space as ns
from derham.subspace import Subspace

SQUARE = [[1, 1], [1, -1], [-1, 1], [-1, -1]]


def sample_spaces():
    rng = np.random.default_rng(5)
    yield ns.polyhedral_vertices(SQUARE)
    yield ns.polyhedral_facets([[1, 0], [0, 1], [1, 1]])
    yield ns.p_norm(1, 3)
    yield ns.p_norm(3, 2)
    yield ns.p_norm("inf", 4)
    m = rng.standard_normal((3, 3))
    yield ns.gram(m @ m.T + np.eye(3))
    yield gen.random_polytope_norm(3, 6, rng)
    yield gen.product_norm(["linf2", "l12"], rng, distort=True)[0]
    yield ns.restricted(ns.p_norm(1, 3), np.array([[1, 0], [1, 1], [0, 2.0]]))


def test_square_vertex_has_norm_one():
    assert ns.norm(ns.polyhedral_vertices(SQUARE), [1, 1]) == pytest.approx(1.0, abs=1e-12)


def test_identity_gram():
    assert ns.norm(ns.euclidean(2), [3, 4]) == pytest.approx(5.0, abs=1e-15)


def test_product_of_two_lines():
    line = ns.euclidean(1)
    assert ns.norm(ns.product([line, line]), [3, 4]) == pytest.approx(5.0, abs=1e-15)


def test_vertex_and_facet_forms_agree():
    # the hexagon given by its vertices and by its facets
    v = ns.polyhedral_vertices([[1, 0], [0, 1], [-1, 1]])
    f = ns.polyhedral_facets(v.facet_functionals())
    x = np.random.default_rng(0).standard_normal((200, 2))
    np.testing.assert_allclose(ns.norm(v, x), ns.norm(f, x), rtol=1e-12)


def test_polyhedral_cube_matches_sup_norm():
    cube = ns.polyhedral_vertices(list(itertools.product([1, -1], repeat=3)))
    x = np.random.default_rng(1).standard_normal((300, 3))
    np.testing.assert_allclose(ns.norm(cube, x), np.max(np.abs(x), axis=1), rtol=1e-12)
    np.testing.assert_allclose(ns.norm(ns.p_norm("inf", 3), x), np.max(np.abs(x), axis=1), rtol=1e-15)


def test_p_norm_matches_numpy():
    x = np.random.default_rng(2).standard_normal((100, 4))
    for p in (1, 1.5, 3, 4):
        np.testing.assert_allclose(ns.norm(ns.p_norm(p, 4), x), np.linalg.norm(x, ord=p, axis=1), rtol=1e-12)


def test_degenerate_inputs_rejected():
    with pytest.raises(ns.NormError):
        ns.polyhedral_vertices([[1, 0], [2, 0]])
    with pytest.raises(ns.NormError):
        ns.gram([[1, 2], [2, 1]])
    with pytest.raises(ns.NormError):
        ns.p_norm(0.5, 2)
    with pytest.raises(ns.NormError):
        ns.product([ns.euclidean(1), ns.euclidean(1)], [[1, 0], [2, 0]])


def test_defining_split_residual_is_zero():
    space, subs = gen.product_norm(["linf2", "l12"])
    chk = ns.is_product_decomposition(space, subs[0], subs[1])
    assert chk.is_product and chk.worst_residual == 0.0


def test_sup_norm_axes_are_not_a_product():
    space = ns.p_norm("inf", 2)
    e = np.eye(2)
    chk = ns.is_product_decomposition(space, Subspace(e[:, :1]), Subspace(e[:, 1:]))
    assert not chk.is_product
    assert ns.norm(space, [1, 1]) == 1.0


def test_orthogonal_planes_in_euclidean_four_space():
    q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((4, 4)))
    chk = ns.is_product_decomposition(ns.euclidean(4), Subspace(q[:, :2]), Subspace(q[:, 2:]))
    assert chk.is_product


def test_hull_dimensions_add():
    assert ns.hull_dimension_additivity(ns.p_norm(1, 2), ns.euclidean(3))
    assert ns.product([ns.euclidean(0), ns.p_norm(1, 2)]).dim == 2
    nested = ns.product([ns.product([ns.euclidean(1), ns.p_norm(1, 2)]), ns.p_norm("inf", 2)])
    assert nested.dim == 5 and len(ns.leaf_components(nested)) == 3


def test_json_round_trip():
    for sp in sample_spaces():
        back = ns.from_dict(sp.to_dict())
        x = np.random.default_rng(4).standard_normal((50, sp.dim))
        np.testing.assert_allclose(ns.norm(back, x), ns.norm(sp, x), rtol=1e-12)


def test_linear_image_pushes_forward():
    t = np.array([[2.0, 1.0], [0.0, 1.0]])
    for base in (ns.p_norm(1, 2), ns.p_norm(3, 2), ns.euclidean(2)):
        img = ns.linear_image(base, t)
        x = np.random.default_rng(6).standard_normal((40, 2))
        np.testing.assert_allclose(ns.norm(img, x @ t.T), ns.norm(base, x), rtol=1e-12)


def test_decompose_norm():
    space, _ = gen.product_norm(["l22", "linf2", "l12"])
    rep = ns.decompose_norm(space)
    assert rep.verified and rep.euclidean.dim == 2 and len(rep.factors) == 2


def test_candidate_splits_of_four_lines():
    space = ns.product([ns.p_norm("inf", 1)] * 4)
    assert len(ns.candidate_splits(space)) == 7


@pytest.mark.parametrize("space", list(sample_spaces()), ids=lambda s: s.form)
def test_homogeneity_symmetry_triangle(space):
    rng = np.random.default_rng(10)
    x = rng.standard_normal((1000, space.dim))
    y = rng.standard_normal((1000, space.dim))
    lam = rng.uniform(-3, 3, 1000)
    nx = ns.norm(space, x)
    assert np.all(nx > 0)
    np.testing.assert_allclose(ns.norm(space, lam[:, None] * x), np.abs(lam) * nx, rtol=1e-9)
    np.testing.assert_allclose(ns.norm(space, -x), nx, rtol=1e-12)
    assert np.all(ns.norm(space, x + y) <= nx + ns.norm(space, y) + 1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_products_pass_their_split(seed):
    space, subs = gen.random_product_norm(seed)
    assert ns.is_product_decomposition(space, subs[0], subs[1]).is_product


@settings(max_examples=30, deadline=None)
@given(d=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_polytope_unit_sphere(d, seed):
    space = gen.random_polytope_norm(d, d + 3, seed)
    np.testing.assert_allclose(ns.norm(space, space.ball_vertices()), 1.0, rtol=1e-9)
