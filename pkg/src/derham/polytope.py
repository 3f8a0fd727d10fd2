"""Small-dimension polytope plumbing: facets, vertices, polarity, faces.

qhull (via :mod:`scipy.spatial`) does the hull work for dimension >= 2; the
one-dimensional case is an interval and handled directly.  Everything here
assumes the point cloud is full-dimensional in its ambient space unless stated
otherwise.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.spatial import ConvexHull, QhullError

FEAS_TOL = 1e-10


def _dedupe_rows(mat: np.ndarray, decimals: int = 9) -> np.ndarray:
    if len(mat) == 0:
        return mat
    keys = np.round(mat, decimals) + 0.0
    _, idx = np.unique(keys, axis=0, return_index=True)
    return mat[np.sort(idx)]


def hull(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertices and facet inequalities ``A x <= b`` of a full-dimensional hull.

    Returns ``(vertex_indices, A, b)`` with unit-norm rows of ``A``.
    """
    pts = np.asarray(points, dtype=float)
    k = pts.shape[1]
    if k == 0:
        return np.array([0]), np.zeros((0, 0)), np.zeros(0)
    if k == 1:
        lo, hi = int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))
        if pts[hi, 0] - pts[lo, 0] <= FEAS_TOL:
            raise ValueError("degenerate one-dimensional hull")
        a = np.array([[1.0], [-1.0]])
        b = np.array([pts[hi, 0], -pts[lo, 0]])
        return np.array(sorted({lo, hi})), a, b
    try:
        h = ConvexHull(pts)
    except QhullError as exc:
        raise ValueError(f"hull is not full-dimensional: {exc}") from exc
    eq = _dedupe_rows(h.equations)
    a, b = eq[:, :-1], -eq[:, -1]
    return np.sort(h.vertices), a, b


def polar(points: np.ndarray) -> np.ndarray:
    """Points whose hull is the polar of ``conv(points)``.

    For a body with the origin in its interior the facets ``a.x <= b`` of
    ``conv(points)`` give the vertices ``a / b`` of the polar body.  Applied to
    the vertices of a unit ball this yields its facet functionals, and vice
    versa.
    """
    _, a, b = hull(points)
    if np.any(b <= FEAS_TOL):
        raise ValueError("origin is not an interior point")
    return a / b[:, None]


def symmetric_closure(points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return _dedupe_rows(np.vstack([pts, -pts]))


def incidence(vertices: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Boolean ``(n_vertices, n_facets)`` matrix of tight facet inequalities."""
    scale = max(1.0, float(np.max(np.abs(b)))) if len(b) else 1.0
    return np.abs(vertices @ a.T - b[None, :]) <= tol * scale


def _face_rank(normals: np.ndarray) -> int:
    if len(normals) == 0:
        return 0
    s = np.linalg.svd(normals, compute_uv=False)
    return int(np.sum(s > 1e-9 * max(1.0, s[0])))


def edges(vertices: np.ndarray, a: np.ndarray, b: np.ndarray,
          inc: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Vertex pairs spanning an edge of a full-dimensional polytope."""
    k = vertices.shape[1]
    if inc is None:
        inc = incidence(vertices, a, b)
    if k == 1:
        return [(0, 1)] if len(vertices) == 2 else []
    out = []
    for i, j in itertools.combinations(range(len(vertices)), 2):
        common = inc[i] & inc[j]
        if common.sum() >= k - 1 and _face_rank(a[common]) == k - 1:
            out.append((i, j))
    return out


def two_faces(vertices: np.ndarray, a: np.ndarray, b: np.ndarray,
              edge_list: list[tuple[int, int]], inc: np.ndarray | None = None) -> list[tuple[int, ...]]:
    """Vertex sets of the 2-dimensional faces (dimension >= 2)."""
    k = vertices.shape[1]
    if k < 2:
        return []
    if inc is None:
        inc = incidence(vertices, a, b)
    if k == 2:
        return [tuple(range(len(vertices)))]
    nbrs: dict[int, set[int]] = {}
    for i, j in edge_list:
        nbrs.setdefault(i, set()).add(j)
        nbrs.setdefault(j, set()).add(i)
    faces = set()
    for u, adj in nbrs.items():
        for v, w in itertools.combinations(sorted(adj), 2):
            common = inc[u] & inc[v] & inc[w]
            if _face_rank(a[common]) != k - 2:
                continue
            members = np.nonzero(np.all(inc[:, common], axis=1))[0]
            faces.add(tuple(int(m) for m in members))
    return sorted(faces)


def enumerate_vertices(a: np.ndarray, b: np.ndarray, tol: float = 1e-9,
                       max_subsets: int = 2_000_000) -> np.ndarray:
    """Vertices of a pointed polyhedron ``{x : A x <= b}`` by brute force.

    Every vertex is the solution of ``k`` linearly independent tight
    constraints; all ``k``-subsets are tried.  Works for lower-dimensional
    polytopes where qhull would need an interior point.
    """
    m, k = a.shape
    if k == 0:
        return np.zeros((1, 0))
    n_sub = 1
    for i in range(k):
        n_sub = n_sub * (m - i) // (i + 1)
    if n_sub > max_subsets:
        raise ValueError(f"vertex enumeration over {n_sub} subsets exceeds the cap")
    combos = np.array(list(itertools.combinations(range(m), k)), dtype=int)
    if len(combos) == 0:
        return np.zeros((0, k))
    mats = a[combos]
    rhs = b[combos]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-12
    if not np.any(ok):
        return np.zeros((0, k))
    sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    scale = max(1.0, float(np.max(np.abs(b))))
    feas = np.all(sols @ a.T <= b[None, :] + tol * scale, axis=1)
    return _dedupe_rows(sols[feas], decimals=8)


def unit_ball_volume(dim: int) -> float:
    from math import gamma, pi

    return pi ** (dim / 2) / gamma(dim / 2 + 1)
