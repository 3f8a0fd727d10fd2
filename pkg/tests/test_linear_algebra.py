import itertools
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from derham import polytope
from derham.subspace import (Subspace, intersect, is_direct_sum, orthogonal_complement, principal_cosines,
                             projector, span_sum)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 6), k=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_projector_pair(n, k, seed):
    k = min(k, n - 1)
    rng = np.random.default_rng(seed)
    s, t = Subspace(rng.standard_normal((n, k))), Subspace(rng.standard_normal((n, n - k)))
    assert is_direct_sum(s, t, n)
    p, q = projector(s, t), projector(t, s)
    np.testing.assert_allclose(p @ p, p, atol=1e-8)
    np.testing.assert_allclose(p + q, np.eye(n), atol=1e-8)
    np.testing.assert_allclose(p @ t.basis, 0, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 6), seed=st.integers(0, 2**32 - 1))
def test_intersection_dimension_formula(n, seed):
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal((n, 1))
    s = Subspace(np.hstack([shared, rng.standard_normal((n, 1))]))
    t = Subspace(np.hstack([shared, rng.standard_normal((n, 1))]))
    assert intersect(s, t).dim + span_sum(s, t).dim == s.dim + t.dim
    assert intersect(s, t).contains(shared[:, 0])


def test_orthogonal_complement_under_gram():
    g = np.array([[2.0, 1.0], [1.0, 3.0]])
    s = Subspace(np.array([[1.0], [0.0]]))
    c = orthogonal_complement(s, g)
    assert c.dim == 1
    assert abs(float(s.basis[:, 0] @ g @ c.basis[:, 0])) < 1e-12
    assert np.max(principal_cosines(s, c, g)) < 1e-12


def test_cube_hull_and_faces():
    cube = np.array(list(itertools.product([-1.0, 1.0], repeat=3)))
    idx, a, b = polytope.hull(cube)
    assert len(idx) == 8 and len(a) == 6
    edge_list = polytope.edges(cube[idx], a, b)
    assert len(edge_list) == 12
    assert len(polytope.two_faces(cube[idx], a, b, edge_list)) == 6
    verts = polytope.enumerate_vertices(a, b)
    assert len(verts) == 8


def test_unit_ball_volume():
    assert math.isclose(polytope.unit_ball_volume(2), math.pi)
    assert math.isclose(polytope.unit_ball_volume(3), 4 * math.pi / 3)
