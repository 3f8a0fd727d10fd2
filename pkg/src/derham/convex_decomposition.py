"""Direct-sum structure of convex polyhedra containing the origin.

A body is ``conv(vertices) + span(lineality)``.  The lineality space is read
off the generators, the linear hull is the span of all generators, and the
decomposition into indecomposable direct summands is found by a finite search
over groups of edge directions.

Why edge directions: if ``C = C1 (+) C2`` then every edge of ``C`` is an edge
of one summand translated by a vertex of the other, so each summand's hull is
spanned by a subset of the edge directions.  A 2-face that is not a
parallelogram lies in a single summand, which lets directions be grouped
before the subset search.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import polytope
from .metric_factorizer import _threads
from .subspace import (Subspace, column_basis, intersect, is_direct_sum, null_space, numerical_rank,
                       orthogonal_complement, principal_cosines, span_sum)

MEMBER_TOL = 1e-9
DEFAULT_SEARCH_CAP = 6


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConvexBody:
    vertices: np.ndarray
    lineality: np.ndarray
    gram: np.ndarray | None = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        d = v.shape[1]
        lin = np.asarray(self.lineality, dtype=float) if self.lineality is not None else np.zeros((0, d))
        lin = lin.reshape(-1, d)
        lin_basis = column_basis(lin.T).T if len(lin) else np.zeros((0, d))
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "lineality", lin_basis)
        if self.gram is not None:
            g = np.asarray(self.gram, dtype=float)
            if g.shape != (d, d):
                raise DecompositionError(f"gram matrix must be {d}x{d}")
            object.__setattr__(self, "gram", g)
        if not self.contains(np.zeros(d)):
            raise DecompositionError("the body must contain the origin")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def contains(self, x, tol: float = MEMBER_TOL) -> bool:
        return membership_residual(self, x) <= tol * max(1.0, float(np.max(np.abs(x))) if np.size(x) else 1.0)

    def canonical(self) -> ConvexBody:
        """Drop generators that are not extreme modulo the lineality space."""
        return ConvexBody(_extreme_points(self), self.lineality, self.gram)

    def to_dict(self) -> dict:
        out = {"vertices": self.vertices.tolist(), "lineality": self.lineality.tolist()}
        if self.gram is not None:
            out["gram"] = self.gram.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ConvexBody:
        if "vertices" not in data:
            raise DecompositionError("polytope description needs a 'vertices' field")
        v = np.asarray(data["vertices"], dtype=float)
        lin = data.get("lineality") or np.zeros((0, v.shape[1]))
        return cls(v, lin, data.get("gram"))


def box(half_widths) -> ConvexBody:
    h = np.asarray(half_widths, dtype=float)
    pts = np.array(list(itertools.product([-1.0, 1.0], repeat=len(h)))) * h
    return ConvexBody(pts, np.zeros((0, len(h))))


def direct_sum_body(bodies, bases=None) -> ConvexBody:
    """Minkowski sum of bodies embedded along complementary ``bases``."""
    bodies = list(bodies)
    dims = [b.dim for b in bodies]
    total = sum(dims)
    if bases is None:
        eye = np.eye(total)
        bases = np.split(eye, np.cumsum(dims)[:-1], axis=1)
    pts = np.zeros((1, total))
    lin = []
    for b, basis in zip(bodies, bases):
        emb = b.vertices @ basis.T
        pts = (pts[:, None, :] + emb[None, :, :]).reshape(-1, total)
        if len(b.lineality):
            lin.append(b.lineality @ basis.T)
    lin = np.vstack(lin) if lin else np.zeros((0, total))
    return ConvexBody(polytope._dedupe_rows(pts), lin)


def membership_residual(body: ConvexBody, x) -> float:
    """L1 distance of ``x`` from the generator cone equations (0 iff ``x`` in the body)."""
    x = np.asarray(x, dtype=float)
    v, lin = body.vertices, body.lineality
    m, k, d = len(v), len(lin), body.dim
    # x = V^T lam + L^T (mu+ - mu-) + s+ - s-
    a_eq = np.hstack([v.T, lin.T, -lin.T, np.eye(d), -np.eye(d)])
    a_eq = np.vstack([a_eq, np.concatenate([np.ones(m), np.zeros(2 * k + 2 * d)])])
    b_eq = np.concatenate([x, [1.0]])
    cost = np.concatenate([np.zeros(m + 2 * k), np.ones(2 * d)])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return float("inf")
    return float(res.fun)


def lineality_space(body: ConvexBody) -> Subspace:
    return Subspace(body.lineality.T) if len(body.lineality) else Subspace.zero(body.dim)


def linear_hull(body: ConvexBody) -> Subspace:
    gens = np.vstack([body.vertices, body.lineality])
    return Subspace(column_basis(gens.T))


def _extreme_points(body: ConvexBody) -> np.ndarray:
    lin = lineality_space(body)
    hull_sub = linear_hull(body)
    rest = orthogonal_complement(lin, within=hull_sub)
    if rest.dim == 0:
        return np.zeros((1, body.dim))
    q = rest.orthonormal()
    coords = body.vertices @ q
    if rest.dim == 1:
        idx = sorted({int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))})
    else:
        idx, _, _ = polytope.hull(coords)
    return polytope._dedupe_rows(coords[idx] @ q.T)


def h_representation(body: ConvexBody) -> tuple[Subspace, np.ndarray, np.ndarray]:
    """``(H, F, b)`` with ``body = {x in H : F x <= b}``."""
    lin = lineality_space(body)
    hull_sub = linear_hull(body)
    rest = orthogonal_complement(lin, within=hull_sub)
    d = body.dim
    if rest.dim == 0:
        return hull_sub, np.zeros((0, d)), np.zeros(0)
    q = rest.orthonormal()
    _, a, b = polytope.hull(body.vertices @ q)
    return hull_sub, a @ q.T, b


def intersect_bodies(b1: ConvexBody, b2: ConvexBody) -> ConvexBody:
    h1, f1, c1 = h_representation(b1)
    h2, f2, c2 = h_representation(b2)
    w = intersect(h1, h2)
    d = b1.dim
    if w.dim == 0:
        return ConvexBody(np.zeros((1, d)), np.zeros((0, d)))
    wb = w.orthonormal()
    f = np.vstack([f1, f2]) @ wb
    c = np.concatenate([c1, c2])
    lin_coords = null_space(f) if len(f) else np.eye(w.dim)
    lin = (wb @ lin_coords).T
    if lin_coords.shape[1] == w.dim:
        return ConvexBody(np.zeros((1, d)), lin)
    # quotient by the lineality, then the polyhedron is a pointed polytope
    r = orthogonal_complement(Subspace(lin_coords), within=None).orthonormal() \
        if lin_coords.shape[1] else np.eye(w.dim)
    verts = polytope.enumerate_vertices(f @ r, c)
    if len(verts) == 0:
        verts = np.zeros((1, r.shape[1]))
    return ConvexBody(np.vstack([verts @ r.T @ wb.T, np.zeros((1, d))]), lin).canonical()


# ---- direct sums -----------------------------------------------------------------------

@dataclass
class DirectSumDecomposition:
    parts: list[tuple[Subspace, ConvexBody]]
    orthogonal: bool
    lineality_part: bool = False
    partial: bool = False
    candidates_tested: int = 0
    valid_splits: int = 0
    log: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.parts)

    def keys(self) -> list[tuple]:
        return sorted(subspace_key(s) for s, _ in self.parts)

    def to_dict(self) -> dict:
        return {"parts": [{"dim": s.dim, "basis": s.to_list(), "body": b.to_dict()} for s, b in self.parts],
                "orthogonal": self.orthogonal, "lineality_part": self.lineality_part,
                "partial": self.partial, "candidates_tested": self.candidates_tested,
                "valid_splits": self.valid_splits, "log": self.log}


def subspace_key(s: Subspace, decimals: int = 6) -> tuple:
    """Hashable canonical form: the rounded orthogonal projector."""
    q = s.orthonormal()
    return tuple(np.round(q @ q.T, decimals).ravel() + 0.0)


def split_projector(onto: Subspace, along: Subspace) -> np.ndarray:
    """Projection onto ``onto`` along ``along``, valid on their (direct) sum."""
    basis = np.hstack([onto.basis, along.basis])
    return onto.basis @ np.linalg.pinv(basis)[: onto.dim]


def _sum_condition(pts: np.ndarray, p1: np.ndarray, p2: np.ndarray, a: np.ndarray, b: np.ndarray,
                   tol: float) -> bool:
    """All ``P1 v + P2 w`` inside ``{A x <= b}`` for vertex pairs ``v, w``."""
    x1 = pts @ p1.T @ a.T
    x2 = pts @ p2.T @ a.T
    worst = np.max(x1[:, None, :] + x2[None, :, :] - b[None, None, :])
    return bool(worst <= tol * max(1.0, float(np.max(np.abs(b)))))


@dataclass
class _Geometry:
    pts: np.ndarray              # extreme points in working coordinates
    a: np.ndarray
    b: np.ndarray
    classes: list[np.ndarray]    # unit edge directions, one per parallel class
    groups: list[list[int]]      # class indices forced to stay together


def _edge_classes(pts: np.ndarray, edge_list) -> tuple[list[np.ndarray], dict]:
    classes: list[np.ndarray] = []
    of_edge = {}
    for i, j in edge_list:
        d = pts[j] - pts[i]
        d = d / np.linalg.norm(d)
        for c, u in enumerate(classes):
            if abs(abs(float(u @ d)) - 1.0) <= 1e-9:
                of_edge[(i, j)] = c
                break
        else:
            of_edge[(i, j)] = len(classes)
            classes.append(d)
    return classes, of_edge


def _geometry(pts: np.ndarray, group: bool = True) -> _Geometry:
    k = pts.shape[1]
    idx, a, b = polytope.hull(pts)
    pts = pts[idx]
    inc = polytope.incidence(pts, a, b)
    edge_list = polytope.edges(pts, a, b, inc)
    classes, of_edge = _edge_classes(pts, edge_list)
    parent = list(range(len(classes)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    if group and k >= 2:
        for face in polytope.two_faces(pts, a, b, edge_list, inc):
            fs = set(face)
            cls = {c for (i, j), c in of_edge.items() if i in fs and j in fs}
            if len(cls) != 2:
                cls = sorted(cls)
                for c in cls[1:]:
                    parent[find(c)] = find(cls[0])
    groups: dict[int, list[int]] = {}
    for c in range(len(classes)):
        groups.setdefault(find(c), []).append(c)
    return _Geometry(pts, a, b, classes, sorted(groups.values()))


def _valid_splits(geo: _Geometry, units: list[list[int]], tol: float = 1e-9) -> tuple[list[frozenset], int]:
    """Subsets ``S`` of ``units`` (containing unit 0) giving a direct-sum splitting."""
    k = geo.pts.shape[1]
    n = len(units)
    spans = [np.array([geo.classes[c] for c in u]).T for u in units]
    subsets = [frozenset(s) for r in range(1, n) for s in itertools.combinations(range(n), r) if 0 in s]

    def test(s):
        m1 = np.hstack([spans[i] for i in s])
        m2 = np.hstack([spans[i] for i in range(n) if i not in s])
        r1, r2 = numerical_rank(m1), numerical_rank(m2)
        if r1 + r2 != k or numerical_rank(np.hstack([m1, m2])) != k:
            return False
        s1, s2 = Subspace(column_basis(m1)), Subspace(column_basis(m2))
        return _sum_condition(geo.pts, split_projector(s1, s2), split_projector(s2, s1), geo.a, geo.b, tol)

    if _threads() > 1 and len(subsets) > 16:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            ok = list(pool.map(test, subsets))
    else:
        ok = [test(s) for s in subsets]
    return [s for s, good in zip(subsets, ok) if good], len(subsets)


def _finest_parts(n_units: int, splits: list[frozenset]) -> list[list[int]]:
    """Units kept together by every valid splitting."""
    sig = {u: tuple(u in s for s in splits) for u in range(n_units)}
    blocks: dict[tuple, list[int]] = {}
    for u in range(n_units):
        blocks.setdefault(sig[u], []).append(u)
    return sorted(blocks.values())


def _bounded_part(body: ConvexBody) -> tuple[Subspace, Subspace, np.ndarray]:
    """(lineality, complement inside H(C), projected generators) for the split-off."""
    lin = lineality_space(body)
    hull_sub = linear_hull(body)
    rest = orthogonal_complement(lin, gram=body.gram, within=hull_sub)
    if lin.dim:
        proj = split_projector(rest, lin)
        pts = body.vertices @ proj.T
    else:
        pts = body.vertices
    return lin, rest, pts


def _decompose(body: ConvexBody, group: bool, cap: int, order_seed: int | None) -> DirectSumDecomposition:
    d = body.dim
    lin, rest, pts = _bounded_part(body)
    parts: list[tuple[Subspace, ConvexBody]] = []
    log = []
    if lin.dim:
        parts.append((lin, ConvexBody(np.zeros((1, d)), lin.basis.T)))
        log.append(f"lineality space of dimension {lin.dim} split off")
    tested = valid = 0
    partial = False
    k = rest.dim
    if k == 1:
        parts.append((rest, ConvexBody(pts, np.zeros((0, d))).canonical()))
    elif k >= 2:
        q = rest.orthonormal()
        coords = pts @ q
        if order_seed is not None:
            coords = coords[np.random.default_rng(order_seed).permutation(len(coords))]
        geo = _geometry(coords, group=group)
        units = geo.groups if group else [[c] for c in range(len(geo.classes))]
        log.append(f"{len(geo.classes)} edge-direction classes in {len(units)} units")
        if k > cap or len(units) > 2 * cap + 4:
            partial = True
            log.append(f"search skipped: dimension {k} or {len(units)} units exceed the cap")
            blocks = [list(range(len(units)))]
        else:
            splits, tested = _valid_splits(geo, units)
            valid = len(splits)
            blocks = _finest_parts(len(units), splits)
        subs = []
        for blk in blocks:
            dirs = np.array([geo.classes[c] for u in blk for c in units[u]]).T
            subs.append(Subspace(column_basis(q @ dirs)))
        for i, s in enumerate(subs):
            others = [o for j, o in enumerate(subs) if j != i]
            along = span_sum(lin, *others) if (others or lin.dim) else Subspace.zero(d)
            proj = split_projector(s, along) if along.dim else column_basis(s.basis) @ column_basis(s.basis).T
            body_i = ConvexBody(pts @ proj.T, np.zeros((0, d))).canonical()
            parts.append((s, body_i))
    orthogonal = False
    if body.gram is not None:
        subs = [s for s, _ in parts]
        orthogonal = all(np.all(principal_cosines(s, t, body.gram) <= 1e-9)
                         for s, t in itertools.combinations(subs, 2))
    parts.sort(key=lambda st: subspace_key(st[0]))
    return DirectSumDecomposition(parts, orthogonal, bool(lin.dim), partial, tested, valid, log)


def gruber_decompose(body: ConvexBody, search_cap: int = DEFAULT_SEARCH_CAP,
                     order_seed: int | None = None) -> DirectSumDecomposition:
    """Decompose into the lineality space and indecomposable direct summands.

    Edge-direction classes are grouped through non-parallelogram 2-faces and
    every 2-splitting of the groups is tested; the parts are the groups that
    all valid splittings keep on the same side.
    """
    return _decompose(body, True, search_cap, order_seed)


def brute_force_decompose(body: ConvexBody, search_cap: int = 12) -> DirectSumDecomposition:
    """Oracle: every 2-colouring of edge-direction classes, no grouping."""
    return _decompose(body, False, search_cap, None)


def is_indecomposable(body: ConvexBody) -> bool:
    dec = brute_force_decompose(body)
    return dec.k <= 1 and not dec.lineality_part


def verify_decomposition(body: ConvexBody, subspaces: list[Subspace], tol: float = 1e-9) -> bool:
    """Hulls independent, spanning ``H(C)``, and ``C = sum of projections of C``."""
    hull_sub = linear_hull(body)
    total = span_sum(*subspaces)
    if sum(s.dim for s in subspaces) != total.dim or total.dim != hull_sub.dim:
        return False
    if intersect(total, hull_sub).dim != hull_sub.dim:
        return False
    for i, s in enumerate(subspaces):
        others = span_sum(*[o for j, o in enumerate(subspaces) if j != i]) if len(subspaces) > 1 \
            else Subspace.zero(body.dim)
        p1 = split_projector(s, others)
        p2 = split_projector(others, s) if others.dim else np.zeros((body.dim, body.dim))
        if not _pair_condition(body, p1, p2, tol):
            return False
    return True


def _pair_condition(body: ConvexBody, p1: np.ndarray, p2: np.ndarray, tol: float) -> bool:
    lin = lineality_space(body)
    for p in (p1, p2):
        for w in (p @ lin.basis).T:
            if not lin.contains(w, 1e-8):
                return False
    v = body.vertices
    sums = (v @ p1.T)[:, None, :] + (v @ p2.T)[None, :, :]
    _, f, b = h_representation(body)
    if len(f) == 0:
        return True
    worst = np.max(sums.reshape(-1, body.dim) @ f.T - b[None, :])
    return bool(worst <= tol * max(1.0, float(np.max(np.abs(b)))))


# ---- the verification lemmas -------------------------------------------------------------

@dataclass
class LemmaReport:
    passed: bool
    refused: bool
    reason: str
    residual: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "refused": self.refused, "reason": self.reason,
                "residual": self.residual, "details": self.details}


def _refuse(reason: str) -> LemmaReport:
    return LemmaReport(False, True, reason)


def _factor_body(body: ConvexBody, onto: Subspace, along: Subspace) -> ConvexBody:
    p = split_projector(onto, along)
    lin = body.lineality @ p.T
    lin = lin[np.linalg.norm(lin, axis=1) > 1e-12] if len(lin) else lin
    return ConvexBody(body.vertices @ p.T, lin).canonical()


def _check_orthogonal_decomposition(body: ConvexBody, g: np.ndarray, s: Subspace, sbar: Subspace,
                                    name: str) -> str | None:
    if not verify_decomposition(body, [s, sbar]):
        return f"{name} is not a direct-sum decomposition of the body"
    if s.dim and sbar.dim and np.max(principal_cosines(s, sbar, g)) > 1e-9:
        return f"{name} is not orthogonal for the given inner product"
    return None


def _same_body(b1: ConvexBody, b2: ConvexBody, tol: float) -> tuple[bool, float]:
    l1, l2 = lineality_space(b1), lineality_space(b2)
    if l1.dim != l2.dim or span_sum(l1, l2).dim != l1.dim:
        return False, float("inf")
    worst = 0.0
    for x, other in [(b1.vertices, b2), (b2.vertices, b1)]:
        for v in x:
            worst = max(worst, membership_residual(other, v))
    return worst <= tol, worst


def check_lemma_eucl(body: ConvexBody, gram, a: Subspace, abar: Subspace, b: Subspace,
                     bbar: Subspace, tol: float = 1e-9) -> LemmaReport:
    """Projecting ``(A cap B) + Abar`` along the B-splitting gives back ``B``."""
    g = np.eye(body.dim) if gram is None else np.asarray(gram, dtype=float)
    for s, sb, name in [(a, abar, "(A, Abar)"), (b, bbar, "(B, Bbar)")]:
        why = _check_orthogonal_decomposition(body, g, s, sb, name)
        if why:
            return _refuse(why)
    a_body = _factor_body(body, a, abar)
    abar_body = _factor_body(body, abar, a)
    b_body = _factor_body(body, b, bbar)
    ab = intersect_bodies(a_body, b_body)
    p_b = split_projector(b, bbar)
    # P^B is the identity on A cap B, so only the Abar generators move
    va = ab.vertices
    vb = abar_body.vertices @ p_b.T
    sums = (va[:, None, :] + vb[None, :, :]).reshape(-1, body.dim)
    lin = [x for x in (ab.lineality, abar_body.lineality @ p_b.T) if len(x)]
    lin = np.vstack(lin) if lin else np.zeros((0, body.dim))
    lin = lin[np.linalg.norm(lin, axis=1) > 1e-12] if len(lin) else lin
    image = ConvexBody(np.vstack([sums, np.zeros((1, body.dim))]), lin).canonical()
    same, worst = _same_body(image, b_body, tol)
    return LemmaReport(same, False, "projection equals B" if same else "projection differs from B",
                       worst, {"intersection_vertices": ab.vertices.tolist(),
                               "image_vertices": image.vertices.tolist(),
                               "image_lineality_dim": lineality_space(image).dim})


def check_lemma_euclhelp(body: ConvexBody, gram, a: Subspace, abar: Subspace, b: Subspace,
                         bbar: Subspace) -> LemmaReport:
    """If ``B`` meets both ``A`` and ``Abar`` only in 0, then ``B`` is a linear space."""
    g = np.eye(body.dim) if gram is None else np.asarray(gram, dtype=float)
    for s, sb, name in [(a, abar, "(A, Abar)"), (b, bbar, "(B, Bbar)")]:
        why = _check_orthogonal_decomposition(body, g, s, sb, name)
        if why:
            return _refuse(why)
    for other, name in [(a, "A"), (abar, "Abar")]:
        if intersect(b, other).dim:
            return _refuse(f"B meets {name} in a subspace of dimension {intersect(b, other).dim}")
    b_body = _factor_body(body, b, bbar)
    lin = lineality_space(b_body)
    ok = lin.dim == linear_hull(b_body).dim
    return LemmaReport(ok, False, "B equals its lineality space" if ok else "B is not a linear space",
                       float(linear_hull(b_body).dim - lin.dim), {"lineality_dim": lin.dim, "dim": b.dim})
