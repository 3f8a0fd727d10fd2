"""Linear subspaces given by bases, and the rank-revealing helpers built on them.

Bases are stored as ``(dim, k)`` arrays whose columns span the subspace.  Every
rank decision goes through :func:`numerical_rank`, a pivoted QR with a pivot
tolerance relative to the largest pivot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

PIVOT_TOL = 1e-10


def numerical_rank(mat: np.ndarray, tol: float = PIVOT_TOL) -> int:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.size == 0:
        return 0
    _, r, _ = scipy.linalg.qr(mat, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return 0
    return int(np.sum(diag > tol * max(1.0, diag[0])))


def column_basis(mat: np.ndarray, tol: float = PIVOT_TOL) -> np.ndarray:
    """Orthonormal basis of the column span of ``mat``."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[1] == 0:
        return np.zeros((mat.shape[0], 0))
    q, r, _ = scipy.linalg.qr(mat, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((mat.shape[0], 0))
    k = int(np.sum(diag > tol * max(1.0, diag[0])))
    return q[:, :k]


def null_space(mat: np.ndarray, tol: float = PIVOT_TOL) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    n = mat.shape[1]
    if mat.shape[0] == 0:
        return np.eye(n)
    u, s, vh = np.linalg.svd(mat)
    scale = max(1.0, s[0]) if s.size else 1.0
    k = int(np.sum(s > tol * scale))
    return vh[k:].T.copy()


@dataclass(frozen=True)
class Subspace:
    """Span of the columns of ``basis`` (shape ``(ambient_dim, k)``)."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if b.ndim != 2:
            raise ValueError("subspace basis must be a 2-d array")
        if b.shape[1] and numerical_rank(b) != b.shape[1]:
            raise ValueError("subspace basis is not linearly independent")
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_vectors(cls, vectors, ambient_dim: int | None = None) -> Subspace:
        """Build from a list of vectors (rows); dependent vectors are dropped."""
        vecs = np.asarray(vectors, dtype=float)
        if vecs.size == 0:
            if ambient_dim is None:
                raise ValueError("ambient_dim needed for the zero subspace")
            return cls.zero(ambient_dim)
        vecs = np.atleast_2d(vecs)
        return cls(column_basis(vecs.T))

    @classmethod
    def zero(cls, ambient_dim: int) -> Subspace:
        return cls(np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> Subspace:
        return cls(np.eye(ambient_dim))

    @classmethod
    def coordinate(cls, ambient_dim: int, indices) -> Subspace:
        return cls(np.eye(ambient_dim)[:, list(indices)])

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def orthonormal(self) -> np.ndarray:
        return column_basis(self.basis)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        q = self.orthonormal()
        resid = v - q @ (q.T @ v)
        return bool(np.linalg.norm(resid) <= tol * max(1.0, np.linalg.norm(v)))

    def __contains__(self, v) -> bool:
        return self.contains(v)

    def to_list(self) -> list[list[float]]:
        return self.basis.T.tolist()


def span_sum(*subspaces: Subspace) -> Subspace:
    mats = [s.basis for s in subspaces]
    return Subspace(column_basis(np.hstack(mats)))


def intersect(s1: Subspace, s2: Subspace) -> Subspace:
    """Intersection via the null space of ``[B1, -B2]``."""
    if s1.dim == 0 or s2.dim == 0:
        return Subspace.zero(s1.ambient_dim)
    q1, q2 = s1.orthonormal(), s2.orthonormal()
    ns = null_space(np.hstack([q1, -q2]))
    if ns.shape[1] == 0:
        return Subspace.zero(s1.ambient_dim)
    return Subspace(column_basis(q1 @ ns[: q1.shape[1]]))


def is_direct_sum(s1: Subspace, s2: Subspace, ambient_dim: int | None = None) -> bool:
    """True iff ``s1 + s2`` is direct and, when given, fills ``ambient_dim``."""
    stacked = np.hstack([s1.basis, s2.basis])
    r = numerical_rank(stacked) if stacked.shape[1] else 0
    if r != s1.dim + s2.dim:
        return False
    return ambient_dim is None or r == ambient_dim


def projector(onto: Subspace, along: Subspace) -> np.ndarray:
    """Matrix of the linear projection onto ``onto`` with kernel ``along``.

    The two subspaces must be complementary in the ambient space.
    """
    n = onto.ambient_dim
    if not is_direct_sum(onto, along, n):
        raise ValueError("projection needs complementary subspaces")
    basis = np.hstack([onto.basis, along.basis])
    coords = np.linalg.inv(basis)
    return onto.basis @ coords[: onto.dim]


def coordinates(sub: Subspace, v: np.ndarray) -> np.ndarray:
    """Least-squares coordinates of ``v`` (or rows of ``v``) in ``sub.basis``."""
    sol, *_ = np.linalg.lstsq(sub.basis, np.asarray(v, dtype=float).T, rcond=None)
    return sol.T


def orthogonal_complement(sub: Subspace, gram: np.ndarray | None = None,
                          within: Subspace | None = None) -> Subspace:
    """Complement of ``sub`` orthogonal w.r.t. ``gram`` (identity by default),
    optionally taken inside ``within``."""
    n = sub.ambient_dim
    g = np.eye(n) if gram is None else np.asarray(gram, dtype=float)
    host = Subspace.full(n) if within is None else within
    if sub.dim == 0:
        return host
    # v = host @ c with sub^T G v = 0
    constraint = sub.basis.T @ g @ host.basis
    ns = null_space(constraint)
    if ns.shape[1] == 0:
        return Subspace.zero(n)
    return Subspace(column_basis(host.basis @ ns))


def principal_cosines(s1: Subspace, s2: Subspace, gram: np.ndarray | None = None) -> np.ndarray:
    """Cosines of the principal angles between two subspaces in the ``gram`` inner product."""
    n = s1.ambient_dim
    g = np.eye(n) if gram is None else np.asarray(gram, dtype=float)
    if s1.dim == 0 or s2.dim == 0:
        return np.zeros(0)
    l = np.linalg.cholesky(g)
    # G-orthonormal bases: orthonormalize L^T B in the Euclidean sense
    q1 = column_basis(l.T @ s1.basis)
    q2 = column_basis(l.T @ s2.basis)
    return np.linalg.svd(q1.T @ q2, compute_uv=False)
