"""Finite-dimensional normed spaces and their product decompositions.

A norm is described by one of a few concrete forms:

``polyhedral_vertices``  unit ball = conv of a symmetric vertex list
``polyhedral_facets``    unit ball = {v : |a_i . v| <= 1}
``p_norm``               the l_p norm, ``1 <= p <= inf``
``gram``                 ``sqrt(v^T G v)`` for positive-definite ``G``
``product``              ``sqrt(sum ||c_i||_i^2)`` where ``c_i`` are the block
                         coordinates of ``v`` in the concatenated bases
``restricted``           a parent norm pulled back along an injective basis

Vertex lists are converted to facet functionals once (qhull) and cached, so
every polyhedral norm evaluates as a max over facets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import polytope
from .subspace import Subspace, is_direct_sum, numerical_rank, projector

FORMS = ("polyhedral_vertices", "polyhedral_facets", "p_norm", "gram", "product", "restricted")


class NormError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NormedSpace:
    form: str
    dim: int
    vertices: np.ndarray | None = None
    facets: np.ndarray | None = None
    p: float | None = None
    gram: np.ndarray | None = None
    components: tuple = ()
    bases: tuple = ()
    parent: NormedSpace | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.form not in FORMS:
            raise NormError(f"unknown norm form {self.form!r}")

    # -- cached derived data ----------------------------------------------------
    def facet_functionals(self) -> np.ndarray:
        """Symmetric facet functionals of a polyhedral ball."""
        if "facets" not in self._cache:
            if self.form == "polyhedral_facets":
                f = self.facets
            elif self.form == "polyhedral_vertices":
                f = self.vertices if self.dim == 0 else polytope.polar(self.vertices)
            elif self.form == "p_norm" and self.p in (1.0, np.inf):
                f = _lp_vertices(np.inf if self.p == 1.0 else 1.0, self.dim)
            else:
                raise NormError(f"{self.form} ball is not polyhedral")
            self._cache["facets"] = polytope.symmetric_closure(f) if self.dim else f
        return self._cache["facets"]

    def ball_vertices(self) -> np.ndarray:
        if "vertices" not in self._cache:
            if self.form == "polyhedral_vertices":
                idx, _, _ = polytope.hull(self.vertices)
                v = self.vertices[idx]
            elif self.form == "polyhedral_facets":
                v = polytope.polar(self.facets)
            elif self.form == "p_norm" and self.p in (1.0, np.inf):
                v = _lp_vertices(self.p, self.dim)
            else:
                raise NormError(f"{self.form} ball has no vertex list")
            self._cache["vertices"] = polytope.symmetric_closure(v)
        return self._cache["vertices"]

    @property
    def is_polyhedral(self) -> bool:
        return self.form in ("polyhedral_vertices", "polyhedral_facets") or (
            self.form == "p_norm" and self.p in (1.0, np.inf))

    def coordinate_map(self) -> np.ndarray:
        """Product form: inverse of the concatenated bases (ambient -> block coordinates)."""
        if "coords" not in self._cache:
            b = np.hstack(self.bases) if self.bases else np.zeros((0, 0))
            self._cache["coords"] = np.linalg.inv(b) if b.size else b
        return self._cache["coords"]

    def block_slices(self) -> list[slice]:
        out, k = [], 0
        for c in self.components:
            out.append(slice(k, k + c.dim))
            k += c.dim
        return out

    def to_dict(self) -> dict:
        if self.form == "polyhedral_vertices":
            return {"form": self.form, "vertices": self.vertices.tolist()}
        if self.form == "polyhedral_facets":
            return {"form": self.form, "facets": self.facets.tolist()}
        if self.form == "p_norm":
            return {"form": self.form, "p": "inf" if np.isinf(self.p) else self.p, "dim": self.dim}
        if self.form == "gram":
            return {"form": self.form, "matrix": self.gram.tolist()}
        if self.form == "product":
            return {"form": self.form, "components": [c.to_dict() for c in self.components],
                    "bases": [b.T.tolist() for b in self.bases]}
        return {"form": self.form, "parent": self.parent.to_dict(), "basis": self.bases[0].T.tolist()}

    def __repr__(self):
        extra = {"p_norm": f", p={self.p}", "product": f", components={len(self.components)}"}.get(self.form, "")
        return f"NormedSpace({self.form}, dim={self.dim}{extra})"


def _lp_vertices(p: float, dim: int) -> np.ndarray:
    if p == 1.0:
        return np.vstack([np.eye(dim), -np.eye(dim)])
    return np.array(list(itertools.product([1.0, -1.0], repeat=dim)))


# ---- constructors -------------------------------------------------------------

def polyhedral_vertices(vertices) -> NormedSpace:
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    v = polytope.symmetric_closure(v)
    d = v.shape[1]
    if numerical_rank(v) != d:
        raise NormError("vertex list does not span the space (empty interior)")
    return NormedSpace("polyhedral_vertices", d, vertices=v)


def polyhedral_facets(facets) -> NormedSpace:
    a = np.atleast_2d(np.asarray(facets, dtype=float))
    a = polytope.symmetric_closure(a)
    d = a.shape[1]
    if numerical_rank(a) != d:
        raise NormError("facet functionals do not bound the ball")
    return NormedSpace("polyhedral_facets", d, facets=a)


def p_norm(p, dim: int) -> NormedSpace:
    p = np.inf if p in ("inf", "infinity", np.inf) else float(p)
    if not p >= 1:
        raise NormError("p must be at least 1")
    return NormedSpace("p_norm", int(dim), p=p)


def gram(matrix) -> NormedSpace:
    g = np.atleast_2d(np.asarray(matrix, dtype=float)) if np.size(matrix) else np.zeros((0, 0))
    if g.shape[0] != g.shape[1]:
        raise NormError("gram matrix must be square")
    if g.size:
        if not np.allclose(g, g.T, atol=1e-12):
            raise NormError("gram matrix must be symmetric")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise NormError("gram matrix is not positive definite") from None
    return NormedSpace("gram", g.shape[0], gram=g)


def euclidean(dim: int) -> NormedSpace:
    return gram(np.eye(dim))


def product(components, bases=None) -> NormedSpace:
    """l2 product of ``components``; ``bases[i]`` embeds component ``i`` (columns).

    Without bases the components occupy consecutive coordinate blocks.
    """
    comps = tuple(components)
    total = sum(c.dim for c in comps)
    if bases is None:
        eye = np.eye(total)
        bases, k = [], 0
        for c in comps:
            bases.append(eye[:, k:k + c.dim])
            k += c.dim
    bases = tuple(np.asarray(b, dtype=float).reshape(total, -1) for b in bases)
    if len(bases) != len(comps):
        raise NormError("one basis per component required")
    for c, b in zip(comps, bases):
        if b.shape != (total, c.dim):
            raise NormError(f"basis of shape {b.shape} does not embed a {c.dim}-dim component in {total} dims")
    if total and numerical_rank(np.hstack(bases)) != total:
        raise NormError("component bases are not complementary")
    return NormedSpace("product", total, components=comps, bases=bases)


def restricted(parent: NormedSpace, basis) -> NormedSpace:
    """The norm of ``parent`` on the span of ``basis`` (columns), in basis coordinates."""
    b = np.asarray(basis.basis if isinstance(basis, Subspace) else basis, dtype=float)
    b = b.reshape(parent.dim, -1)
    if b.shape[1] and numerical_rank(b) != b.shape[1]:
        raise NormError("restriction basis is not injective")
    return NormedSpace("restricted", b.shape[1], bases=(b,), parent=parent)


def linear_image(space: NormedSpace, t) -> NormedSpace:
    """Push the norm forward along an invertible map: ``||v||' = ||T^{-1} v||``."""
    t = np.asarray(t, dtype=float)
    if space.form == "polyhedral_vertices":
        return polyhedral_vertices(space.vertices @ t.T)
    if space.form == "polyhedral_facets":
        return polyhedral_facets(space.facets @ np.linalg.inv(t))
    if space.form == "gram":
        ti = np.linalg.inv(t)
        g = ti.T @ space.gram @ ti
        return gram((g + g.T) / 2)
    if space.form == "product":
        return product(space.components, [t @ b for b in space.bases])
    return product([space], [t])


def from_dict(data: dict) -> NormedSpace:
    try:
        form = data["form"]
    except (KeyError, TypeError):
        raise NormError("norm description needs a 'form' field") from None
    try:
        if form == "polyhedral_vertices":
            return polyhedral_vertices(data["vertices"])
        if form == "polyhedral_facets":
            return polyhedral_facets(data["facets"])
        if form == "p_norm":
            return p_norm(data["p"], data["dim"])
        if form == "gram":
            return gram(data["matrix"])
        if form == "product":
            comps = [from_dict(c) for c in data["components"]]
            bases = data.get("bases")
            if bases is not None:
                total = sum(x.dim for x in comps)
                bases = [np.asarray(b, dtype=float).reshape(c.dim, total).T for b, c in zip(bases, comps)]
            return product(comps, bases)
        if form == "restricted":
            parent = from_dict(data["parent"])
            return restricted(parent, np.asarray(data["basis"], dtype=float).T)
    except KeyError as exc:
        raise NormError(f"norm form {form!r} is missing field {exc.args[0]!r}") from None
    raise NormError(f"unknown norm form {form!r}")


# ---- evaluation -------------------------------------------------------------------

def norm_sq(space: NormedSpace, v) -> np.ndarray | float:
    """Squared norm; products sum squared component norms without a square root."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != space.dim:
        raise NormError(f"vector of dimension {v.shape[-1]} for a {space.dim}-dim space")
    if space.form == "gram":
        return np.einsum("...i,ij,...j->...", v, space.gram, v)
    if space.form == "product":
        c = v @ space.coordinate_map().T
        total = np.zeros(v.shape[:-1])
        for comp, sl in zip(space.components, space.block_slices()):
            total = total + norm_sq(comp, c[..., sl])
        return total
    n = norm(space, v)
    return n * n


def norm(space: NormedSpace, v) -> np.ndarray | float:
    """Minkowski functional of the unit ball; vectorized over leading axes."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != space.dim:
        raise NormError(f"vector of dimension {v.shape[-1]} for a {space.dim}-dim space")
    if space.dim == 0:
        return np.zeros(v.shape[:-1])
    if space.form in ("polyhedral_facets", "polyhedral_vertices"):
        return np.max(np.abs(v @ space.facet_functionals().T), axis=-1)
    if space.form == "p_norm":
        return np.linalg.norm(v, ord=space.p, axis=-1)
    if space.form in ("gram", "product"):
        return np.sqrt(np.maximum(norm_sq(space, v), 0.0))
    return norm(space.parent, v @ space.bases[0].T)


# ---- product decompositions ----------------------------------------------------------

@dataclass
class ProductCheck:
    is_product: bool
    worst_residual: float
    worst_pair: tuple | None
    samples: int

    def __bool__(self):
        return self.is_product

    def to_dict(self) -> dict:
        return {"is_product": self.is_product, "worst_residual": self.worst_residual,
                "worst_pair": [np.asarray(x).tolist() for x in self.worst_pair] if self.worst_pair else None,
                "samples": self.samples}


def critical_directions(space: NormedSpace, cap: int = 256) -> np.ndarray:
    """Vertices of polyhedral balls (embedded, for products); empty otherwise."""
    if space.is_polyhedral:
        v = space.ball_vertices()
        return v[:cap]
    if space.form == "product":
        parts = [critical_directions(c, cap) @ b.T for c, b in zip(space.components, space.bases)
                 if c.dim]
        parts = [p for p in parts if len(p)]
        return np.vstack(parts)[:cap] if parts else np.zeros((0, space.dim))
    return np.zeros((0, space.dim))


def is_product_decomposition(space: NormedSpace, s1: Subspace, s2: Subspace, samples: int = 512,
                             seed: int = 0, tol: float = 1e-9) -> ProductCheck:
    """Test ``||v1 + v2||^2 = ||v1||^2 + ||v2||^2`` for ``v_i`` in ``s_i``.

    Seeded Gaussian samples plus, for polyhedral forms, every pair of vertex
    projections along the splitting.  The residual is relative to
    ``||v1||^2 + ||v2||^2``.
    """
    n = space.dim
    if s1.ambient_dim != n or s2.ambient_dim != n:
        raise NormError("subspaces live in a different ambient dimension")
    if not is_direct_sum(s1, s2, n):
        raise NormError("subspaces do not form a direct sum spanning the space")
    if s1.dim == 0 or s2.dim == 0:
        return ProductCheck(True, 0.0, None, 0)
    rng = np.random.default_rng(seed)
    c1 = rng.standard_normal((samples, s1.dim)) * rng.uniform(0.1, 3.0, (samples, 1))
    c2 = rng.standard_normal((samples, s2.dim)) * rng.uniform(0.1, 3.0, (samples, 1))
    v1 = c1 @ s1.basis.T
    v2 = c2 @ s2.basis.T
    crit = critical_directions(space)
    if len(crit):
        p1 = crit @ projector(s1, s2).T
        p2 = crit @ projector(s2, s1).T
        a, b = np.meshgrid(np.arange(len(crit)), np.arange(len(crit)), indexing="ij")
        v1 = np.vstack([v1, p1[a.ravel()]])
        v2 = np.vstack([v2, p2[b.ravel()]])
    n1 = norm_sq(space, v1)
    n2 = norm_sq(space, v2)
    n12 = norm_sq(space, v1 + v2)
    denom = n1 + n2
    # pairs whose parts vanish up to rounding carry no information
    keep = denom > 1e-20 * max(1.0, float(np.max(denom)))
    res = np.zeros(len(v1))
    res[keep] = np.abs(n12[keep] - (n1[keep] + n2[keep])) / denom[keep]
    k = int(np.argmax(res))
    worst = float(res[k])
    return ProductCheck(worst <= tol, worst, (v1[k], v2[k]), len(v1))


def hull_dimension_additivity(space1: NormedSpace, space2: NormedSpace) -> bool:
    return product([space1, space2]).dim == space1.dim + space2.dim


def leaf_components(space: NormedSpace) -> list[tuple[NormedSpace, np.ndarray]]:
    """Flatten nested products into (leaf space, embedding basis) pairs."""
    if space.form != "product":
        return [(space, np.eye(space.dim))]
    out = []
    for comp, b in zip(space.components, space.bases):
        for leaf, lb in leaf_components(comp):
            out.append((leaf, b @ lb))
    return out


def candidate_splits(space: NormedSpace) -> list[tuple[Subspace, Subspace]]:
    """Splittings spanned by groups of product components (one per unordered pair)."""
    leaves = [(c, b) for c, b in leaf_components(space) if c.dim]
    out = []
    for r in range(1, len(leaves)):
        for group in itertools.combinations(range(len(leaves)), r):
            if 0 not in group:
                continue
            rest = [i for i in range(len(leaves)) if i not in group]
            out.append((Subspace(np.hstack([leaves[i][1] for i in group])),
                        Subspace(np.hstack([leaves[i][1] for i in rest]))))
    return out


def is_euclidean_form(space: NormedSpace) -> bool:
    """Structural test only: gram, l2, one-dimensional, or products of such."""
    if space.dim <= 1 or space.form == "gram" or (space.form == "p_norm" and space.p == 2.0):
        return True
    if space.form == "product":
        return all(is_euclidean_form(c) for c in space.components)
    return False


@dataclass
class NormDecomposition:
    euclidean: Subspace
    factors: list[tuple[Subspace, NormedSpace, str]]
    verified: bool
    worst_residual: float

    def to_dict(self) -> dict:
        return {"euclidean_factor": {"dim": self.euclidean.dim, "basis": self.euclidean.to_list()},
                "factors": [{"dim": s.dim, "form": sp.form, "basis": s.to_list(), "irreducibility": why}
                            for s, sp, why in self.factors],
                "verified": self.verified, "worst_residual": self.worst_residual}


def decompose_norm(space: NormedSpace, samples: int = 512, seed: int = 0) -> NormDecomposition:
    """Euclidean factor x non-Euclidean leaves, from the product structure of the form.

    Polyhedral leaves of dimension >= 2 are irreducible: a nontrivial product
    ball contains Euclidean discs in the planes spanned by one vector from each
    factor, which a polytope cannot.  Every reported splitting is re-checked
    with :func:`is_product_decomposition`.
    """
    eu, rest = [], []
    for leaf, b in leaf_components(space):
        if leaf.dim == 0:
            continue
        if is_euclidean_form(leaf):
            eu.append(b)
        else:
            why = "polyhedral ball (no Euclidean discs)" if leaf.is_polyhedral else "non-Euclidean leaf form"
            rest.append((Subspace(b), leaf, why))
    e_sub = Subspace(np.hstack(eu)) if eu else Subspace.zero(space.dim)
    parts = ([e_sub] if e_sub.dim else []) + [s for s, _, _ in rest]
    worst, ok = 0.0, True
    for i in range(len(parts) - 1):
        others = Subspace(np.hstack([p.basis for j, p in enumerate(parts) if j != i]))
        chk = is_product_decomposition(space, parts[i], others, samples=samples, seed=seed)
        worst = max(worst, chk.worst_residual)
        ok = ok and chk.is_product
    return NormDecomposition(e_sub, rest, ok, worst)
