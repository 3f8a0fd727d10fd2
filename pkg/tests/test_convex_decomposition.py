import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from derham import convex_decomposition as cd
from derham import generate as gen
from derham.subspace import Subspace, intersect

E2 = np.eye(2)


def plane():
    return cd.ConvexBody([[0.0, 0.0]], E2)


def strip():
    # R x [-1, 1]
    return cd.ConvexBody([[0.0, -1.0], [0.0, 1.0]], [[1.0, 0.0]])


def line(v):
    return Subspace(np.asarray(v, dtype=float).reshape(-1, 1))


def test_lineality_examples():
    assert cd.lineality_space(strip()).contains([1.0, 0.0])
    assert cd.lineality_space(strip()).dim == 1
    assert cd.lineality_space(cd.box([1, 2])).dim == 0
    assert cd.lineality_space(plane()).dim == 2


def test_lineality_directions_lie_in_body():
    for body in (strip(), plane()):
        for v in cd.lineality_space(body).basis.T:
            for t in (-50.0, 50.0):
                assert body.contains(t * v)


def test_linear_hull_examples():
    seg = cd.ConvexBody([[-1, 0, 0], [1, 0, 0]], None)
    assert cd.linear_hull(seg).dim == 1 and cd.linear_hull(seg).contains([1, 0, 0])
    assert cd.linear_hull(cd.box([1, 1, 1])).dim == 3
    tri = cd.ConvexBody([[0, 0, 0], [1, 0, 0], [0, 1, 0]], None)
    h = cd.linear_hull(tri)
    assert h.dim == 2 and not h.contains([0, 0, 1])


def test_origin_required():
    with pytest.raises(cd.DecompositionError):
        cd.ConvexBody([[1.0, 1.0], [2.0, 1.0]], None)


def test_square_splits_along_axes():
    dec = cd.gruber_decompose(cd.box([1, 1]))
    assert dec.k == 2 and not dec.partial
    assert dec.keys() == cd.brute_force_decompose(cd.box([1, 1])).keys()
    for s, _ in dec.parts:
        assert s.dim == 1 and (s.contains([1, 0]) or s.contains([0, 1]))


def test_triangle_is_indecomposable():
    tri = cd.ConvexBody([[0, 0], [1, 0], [0, 1]], None)
    assert cd.gruber_decompose(tri).k == 1
    assert cd.is_indecomposable(tri)


def test_strip_with_identity_gram():
    body = cd.ConvexBody(strip().vertices, strip().lineality, np.eye(2))
    dec = cd.gruber_decompose(body)
    assert dec.lineality_part and dec.orthogonal and dec.k == 2
    bounded = [s for s, b in dec.parts if cd.lineality_space(b).dim == 0]
    assert len(bounded) == 1 and bounded[0].contains([0, 1])


def test_cube_in_four_dimensions():
    dec = cd.gruber_decompose(cd.box([1, 2, 3, 4]))
    assert dec.k == 4
    assert cd.verify_decomposition(cd.box([1, 2, 3, 4]), [s for s, _ in dec.parts])


def test_decomposition_independent_of_search_order():
    body, _ = gen.planted_direct_sum([2, 1, 2], 3)
    keys = {tuple(cd.gruber_decompose(body, order_seed=s).keys()) for s in range(5)}
    assert len(keys) == 1


def test_verify_rejects_wrong_split():
    tri = cd.ConvexBody([[0, 0], [1, 0], [0, 1]], None)
    assert not cd.verify_decomposition(tri, [line([1, 0]), line([0, 1])])


def test_intersect_bodies():
    sq = cd.box([1, 1])
    diamond = cd.ConvexBody([[1.5, 0], [-1.5, 0], [0, 1.5], [0, -1.5]], None)
    inter = cd.intersect_bodies(sq, diamond)
    assert inter.contains([1, 0.5]) and not inter.contains([1, 1])


def test_eucl_lemma_plane():
    rep = cd.check_lemma_eucl(plane(), None, line([1, 0]), line([0, 1]), line([1, 1]), line([1, -1]))
    assert rep.passed and not rep.refused


def test_eucl_lemma_when_splittings_agree():
    sq = cd.box([1, 1])
    rep = cd.check_lemma_eucl(sq, None, line([1, 0]), line([0, 1]), line([1, 0]), line([0, 1]))
    assert rep.passed


def test_eucl_lemma_cube_coordinate_pairs():
    e = np.eye(4)
    cube = cd.box([1, 1, 1, 1])
    a, abar = Subspace(e[:, [0, 1]]), Subspace(e[:, [2, 3]])
    b, bbar = Subspace(e[:, [0, 2]]), Subspace(e[:, [1, 3]])
    assert cd.check_lemma_eucl(cube, None, a, abar, b, bbar).passed


def test_eucl_lemma_refuses_non_decomposition():
    rep = cd.check_lemma_eucl(cd.box([1, 1]), None, line([1, 0]), line([0, 1]), line([1, 1]), line([1, -1]))
    assert rep.refused


def test_euclhelp_plane():
    rep = cd.check_lemma_euclhelp(plane(), None, line([1, 0]), line([0, 1]), line([1, 1]), line([1, -1]))
    assert rep.passed


def test_euclhelp_rotated_planes():
    rng = np.random.default_rng(8)
    body = cd.ConvexBody(np.zeros((1, 4)), np.eye(4))
    e = np.eye(4)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    b, bbar = Subspace(q[:, :2]), Subspace(q[:, 2:])
    assert intersect(b, Subspace(e[:, :2])).dim == 0
    rep = cd.check_lemma_euclhelp(body, None, Subspace(e[:, :2]), Subspace(e[:, 2:]), b, bbar)
    assert rep.passed


def test_euclhelp_refuses_meeting_subspaces():
    e = np.eye(4)
    body = cd.box([1, 1, 1, 1])
    rep = cd.check_lemma_euclhelp(body, None, Subspace(e[:, :2]), Subspace(e[:, 2:]),
                                  Subspace(e[:, [0, 2]]), Subspace(e[:, [1, 3]]))
    assert rep.refused


def test_body_json_round_trip():
    body = strip()
    back = cd.ConvexBody.from_dict(body.to_dict())
    assert back.contains([7.0, 0.5]) and not back.contains([0.0, 1.5])


@settings(max_examples=20, deadline=None)
@given(dims=st.lists(st.integers(1, 2), min_size=2, max_size=3), seed=st.integers(0, 2**32 - 1))
def test_planted_sums_match_oracle(dims, seed):
    body, subs = gen.planted_direct_sum(dims, seed)
    dec = cd.gruber_decompose(body)
    assert dec.keys() == cd.brute_force_decompose(body).keys()
    assert cd.verify_decomposition(body, [s for s, _ in dec.parts])
    assert dec.k >= len(dims)
