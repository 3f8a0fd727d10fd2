"""Seeded instance factories with their ground truth attached.

Every generator takes a ``numpy.random.Generator`` (or a seed) and returns
plain objects; :func:`instance` wraps them into JSON-ready dicts for the CLI.
"""

from __future__ import annotations

import numpy as np

from . import normed_space as ns
from .convex_decomposition import ConvexBody, direct_sum_body
from .metric_core import FiniteMetricSpace, from_points, iterated_product, k2, product
from .product_structure import ProductWitness
from .subspace import Subspace, intersect, orthogonal_complement

KINDS = ("random-product-metric", "shuffled-product", "random-polytope-norm", "product-norm",
         "rotated-euclidean-pair")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---- metric spaces -------------------------------------------------------------------

def random_factor(n: int, seed, kind: str = "points", prefix: str = "p") -> FiniteMetricSpace:
    """A random finite metric space on ``n`` points.

    ``points``: random points in the plane; ``discrete``: distances drawn
    from [1, 2], which always satisfy the triangle inequality.
    """
    rng = _rng(seed)
    labels = [f"{prefix}{i}" for i in range(n)]
    if kind == "discrete":
        d = rng.uniform(1.0, 2.0, (n, n))
        d = np.triu(d, 1)
        d = d + d.T
        return FiniteMetricSpace(labels, d)
    return from_points(rng.uniform(0.0, 3.0, (n, 2)), labels)


def random_product(sizes, seed, kind: str = "points") -> tuple[FiniteMetricSpace, list[FiniteMetricSpace]]:
    rng = _rng(seed)
    factors = [random_factor(n, rng, kind, prefix=chr(ord("a") + i)) for i, n in enumerate(sizes)]
    return iterated_product(factors), factors


def planted_witness(space: FiniteMetricSpace, first_size: int) -> ProductWitness:
    """Witness of a two-factor product built by :func:`metric_core.product`."""
    rest = space.n // first_size
    idx = np.arange(space.n)
    return ProductWitness(space, idx // rest, idx % rest)


def shuffled_product(sizes, seed, kind: str = "points"):
    """Product with points permuted; returns ``(space, factors, perm, witness)``.

    New point ``k`` is old point ``perm[k]``.
    """
    rng = _rng(seed)
    space, factors = random_product(sizes, rng, kind)
    perm = rng.permutation(space.n)
    shuffled = space.permuted(perm)
    rest = space.n // sizes[0]
    witness = ProductWitness(shuffled, perm // rest, perm % rest)
    return shuffled, factors, perm, witness


def fuzz_corpus(seed: int = 0) -> list[dict]:
    """Small spaces with known structure: products, repeats, irreducibles."""
    rng = np.random.default_rng(seed)
    out = []
    shapes = [(2, 2), (2, 3), (3, 3), (2, 4), (2, 5), (3, 4), (2, 2, 2), (2, 2, 3), (2, 6), (4, 3)]
    for sizes in shapes:
        for kind in ("points", "discrete"):
            space, factors = random_product(sizes, rng, kind)
            out.append({"name": f"{kind}-{'x'.join(map(str, sizes))}", "space": space, "factors": factors})
    for n in (4, 5, 6, 8, 9, 12):
        f = random_factor(n, rng, "discrete", "q")
        out.append({"name": f"irreducible-{n}", "space": f, "factors": [f]})
    sq = random_factor(3, rng, "points", "s")
    out.append({"name": "repeat-3x3", "space": product(sq, sq), "factors": [sq, sq]})
    e = k2(1.0)
    out.append({"name": "cube-2x2x2", "space": iterated_product([e, e, e]), "factors": [e, e, e]})
    return out


def four_factor_products(seed: int = 0, count: int = 3) -> list[dict]:
    """16-point products of four two-point spaces (several decompositions)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        ds = rng.uniform(0.5, 3.0, 4) if i else np.ones(4)
        factors = [k2(float(d), (f"a{j}", f"b{j}")) for j, d in enumerate(ds)]
        out.append({"name": f"four-k2-{i}", "space": iterated_product(factors), "factors": factors})
    return out


# ---- normed spaces --------------------------------------------------------------------

def random_polytope_norm(dim: int, n_vertices: int, seed) -> ns.NormedSpace:
    rng = _rng(seed)
    while True:
        v = rng.standard_normal((n_vertices, dim))
        try:
            return ns.polyhedral_vertices(v)
        except (ns.NormError, ValueError):
            continue


NAMED = {
    "linf": lambda d: ns.p_norm("inf", d),
    "l1": lambda d: ns.p_norm(1, d),
    "l2": lambda d: ns.euclidean(d),
    "l4": lambda d: ns.p_norm(4, d),
}


def named_norm(label: str) -> ns.NormedSpace:
    """``linf2``, ``l13``, ``l22``... : family name followed by dimension."""
    for name, make in sorted(NAMED.items(), key=lambda kv: -len(kv[0])):
        if label.startswith(name) and label[len(name):].isdigit():
            return make(int(label[len(name):]))
    raise ValueError(f"unknown norm name {label!r}")


def product_norm(components, seed=None, distort: bool = False):
    """Product of named or given components; returns ``(space, [subspaces])``."""
    comps = [named_norm(c) if isinstance(c, str) else c for c in components]
    space = ns.product(comps)
    subs = [Subspace(b) for b in space.bases]
    if distort:
        rng = _rng(seed)
        n = space.dim
        while True:
            t = rng.standard_normal((n, n)) + 2.0 * np.eye(n)
            if np.linalg.cond(t) < 50:
                break
        space = ns.linear_image(space, t)
        subs = [Subspace(t @ s.basis) for s in subs]
    return space, subs


def random_component(dim: int, seed) -> ns.NormedSpace:
    rng = _rng(seed)
    kind = rng.integers(0, 4)
    if kind == 0:
        return ns.p_norm("inf", dim)
    if kind == 1:
        return ns.p_norm(1, dim)
    if kind == 2:
        m = rng.standard_normal((dim, dim))
        return ns.gram(m @ m.T + dim * np.eye(dim))
    return random_polytope_norm(dim, dim + 2, rng) if dim > 1 else ns.p_norm("inf", 1)


def random_product_norm(seed, max_dim: int = 6, distort: bool = True):
    rng = _rng(seed)
    while True:
        d1 = int(rng.integers(1, 4))
        d2 = int(rng.integers(1, 4))
        if d1 + d2 <= max_dim:
            break
    comps = [random_component(d1, rng), random_component(d2, rng)]
    return product_norm(comps, rng, distort)


def rotated_euclidean_pair(dim: int, seed, random_gram: bool = True):
    """Gram space with two transversal orthogonal splittings into half-dimensional planes."""
    rng = _rng(seed)
    if dim % 2:
        raise ValueError("dimension must be even")
    k = dim // 2
    if random_gram:
        m = rng.standard_normal((dim, dim))
        g = m @ m.T + dim * np.eye(dim)
    else:
        g = np.eye(dim)
    while True:
        a = Subspace(rng.standard_normal((dim, k)))
        b = Subspace(rng.standard_normal((dim, k)))
        abar = orthogonal_complement(a, g)
        bbar = orthogonal_complement(b, g)
        if all(intersect(s, t).dim == 0 for s in (a, abar) for t in (b, bbar)):
            return ns.gram(g), a, abar, b, bbar


# ---- convex bodies -------------------------------------------------------------------------

def random_part(dim: int, seed) -> ConvexBody:
    rng = _rng(seed)
    if dim == 1:
        return ConvexBody([[-rng.uniform(0.5, 2.0)], [rng.uniform(0.5, 2.0)]], None)
    pts = rng.standard_normal((dim + 1 + int(rng.integers(0, 3)), dim))
    pts -= pts.mean(axis=0)
    return ConvexBody(pts, None)


def planted_direct_sum(dims, seed, distort: bool = True) -> tuple[ConvexBody, list[Subspace]]:
    rng = _rng(seed)
    parts = [random_part(d, rng) for d in dims]
    body = direct_sum_body(parts)
    n = body.dim
    splits = np.cumsum(dims)[:-1]
    subs = [Subspace(b) for b in np.split(np.eye(n), splits, axis=1)]
    if distort:
        t = rng.standard_normal((n, n)) + 2.0 * np.eye(n)
        body = ConvexBody(body.vertices @ t.T, None)
        subs = [Subspace(t @ s.basis) for s in subs]
    return body, subs


# ---- CLI-facing instances ----------------------------------------------------------------

def _subspace_list(s: Subspace) -> list:
    return s.basis.T.tolist()


def instance(kind: str, params: dict, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    if kind == "random-product-metric":
        sizes = [int(x) for x in params.get("sizes", [2, 3])]
        space, factors = random_product(sizes, rng, params.get("factor_kind", "points"))
        return {"kind": kind, "space": {"labels": list(space.labels), "dist": space.dist.tolist()},
                "truth": {"factors": [{"labels": list(f.labels), "dist": f.dist.tolist()} for f in factors],
                          "witness": planted_witness(space, sizes[0]).to_dict()
                          if len(sizes) == 2 else None}}
    if kind == "shuffled-product":
        sizes = [int(x) for x in params.get("sizes", [2, 3])]
        space, factors, perm, w = shuffled_product(sizes, rng, params.get("factor_kind", "points"))
        return {"kind": kind, "space": {"labels": list(space.labels), "dist": space.dist.tolist()},
                "truth": {"factors": [{"labels": list(f.labels), "dist": f.dist.tolist()} for f in factors],
                          "permutation": perm.tolist(), "witness": w.to_dict()}}
    if kind == "random-polytope-norm":
        dim = int(params.get("dim", 2))
        space = random_polytope_norm(dim, int(params.get("vertices", 2 * dim + 1)), rng)
        return {"kind": kind, "norm": space.to_dict(), "truth": {"dim": dim}}
    if kind == "product-norm":
        comps = params.get("components", ["linf2", "l12"])
        space, subs = product_norm(comps, rng, bool(params.get("distort", False)))
        return {"kind": kind, "norm": space.to_dict(),
                "truth": {"subspaces": [_subspace_list(s) for s in subs]}}
    if kind == "rotated-euclidean-pair":
        dim = int(params.get("dim", 4))
        space, a, abar, b, bbar = rotated_euclidean_pair(dim, rng, bool(params.get("random_gram", True)))
        return {"kind": kind, "norm": space.to_dict(), "A": _subspace_list(a), "Abar": _subspace_list(abar),
                "B": _subspace_list(b), "Bbar": _subspace_list(bbar), "truth": {"transversal": True}}
    raise ValueError(f"unknown instance kind {kind!r}; expected one of {', '.join(KINDS)}")
