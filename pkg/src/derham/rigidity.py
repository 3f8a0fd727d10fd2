"""Parallelogram defect, composed projections and the transversality checker.

The defect of a norm is the operator norm of ``(x, y) -> (x+y, x-y)/sqrt(2)``
on the l2 square of the space:

    M = sup sqrt((|x+y|^2 + |x-y|^2) / (2 (|x|^2 + |y|^2)))

It is 1 exactly for inner-product norms and at most sqrt(2) always.  Two
product splittings in general position force the space to be Euclidean; the
checker here runs that chain numerically and certifies the conclusion with
two independent certificates (defect and Löwner deviation).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import normed_space as ns
from .loewner import max_inscribed_ellipsoid
from .normed_space import NormedSpace
from .subspace import Subspace, coordinates, intersect, is_direct_sum, projector, span_sum

SQRT2 = float(np.sqrt(2.0))
EUCLID_TOL = 1e-6
POLY_PAIR_CAP = 20_000_000


class RefusalError(ValueError):
    """Precondition failed; this is not a verdict about the lemma."""


# ---- defect -------------------------------------------------------------------------

def defect_ratio(space: NormedSpace, x, y) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    num = ns.norm_sq(space, x + y) + ns.norm_sq(space, x - y)
    den = 2.0 * (ns.norm_sq(space, x) + ns.norm_sq(space, y))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(num / den)


@dataclass
class DefectReport:
    m_value: float
    extremal_pair: tuple[np.ndarray, np.ndarray]
    certified_lower: bool
    global_certified: bool
    method: str
    log: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"m_value": self.m_value,
                "extremal_pair": [self.extremal_pair[0].tolist(), self.extremal_pair[1].tolist()],
                "certified_lower": self.certified_lower, "global_certified": self.global_certified,
                "method": self.method, "log": self.log}


def _polyhedral_defect(space: NormedSpace) -> tuple[float, np.ndarray, np.ndarray] | None:
    """Exact maximum over vertex pairs and facet pairs.

    For fixed norms ``|x| = a``, ``|y| = b`` the numerator is convex in the
    directions of ``x`` and ``y``, so both may be taken at vertices ``u, w``
    of the ball.  Then with ``z = (a, b)`` the numerator is
    ``max_ij (p_i.z)^2 + (r_j.z)^2`` where ``p_i = (f_i.u, f_i.w)`` and
    ``r_j = (f_j.u, -f_j.w)``, and the best ``z`` is the top eigenvector of
    ``p_i p_i^T + r_j r_j^T``.
    """
    verts = space.ball_vertices()
    facets = space.facet_functionals()
    nv, nf = len(verts), len(facets)
    if nv * nv * nf * nf > POLY_PAIR_CAP:
        return None
    fu = verts @ facets.T  # (nv, nf)
    best = (-1.0, None)
    for iu in range(nv):
        p0 = fu[iu][None, :, None]            # f_i . u over (w, i, j)
        p1 = fu[:, :, None]                   # f_i . w
        r0 = fu[iu][None, None, :]            # f_j . u
        r1 = -fu[:, None, :]                  # -f_j . w
        a = p0 * p0 + r0 * r0
        c = p1 * p1 + r1 * r1
        b = p0 * p1 + r0 * r1
        lam = (a + c) / 2 + np.sqrt(((a - c) / 2) ** 2 + b * b)
        k = int(np.argmax(lam))
        if lam.flat[k] > best[0] + 1e-15:
            iw, i, j = np.unravel_index(k, lam.shape)
            best = (float(lam.flat[k]), (iu, iw, i, j))
    iu, iw, i, j = best[1]
    p = np.array([fu[iu, i], fu[iw, i]])
    r = np.array([fu[iu, j], -fu[iw, j]])
    w, v = np.linalg.eigh(np.outer(p, p) + np.outer(r, r))
    z = v[:, -1]
    if z[0] < 0:
        z = -z
    return float(np.sqrt(best[0] / 2)), z[0] * verts[iu], z[1] * verts[iw]


def _pick(ratios: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> int:
    """Largest ratio; near-ties broken lexicographically on the pair."""
    top = np.max(ratios)
    cand = np.flatnonzero(ratios >= top - 1e-15)
    keys = [tuple(np.round(np.concatenate([xs[c], ys[c]]), 12)) for c in cand]
    return int(cand[min(range(len(cand)), key=lambda i: keys[i])])


def _ascent(space: NormedSpace, xs: np.ndarray, ys: np.ndarray, iters: int = 150) -> tuple[np.ndarray, np.ndarray]:
    """Batched projected ascent of the defect ratio with central differences."""
    d = space.dim
    z = np.hstack([xs, ys])
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    step = np.full(len(z), 0.1)
    h = 1e-6

    def f(zz):
        r = defect_ratio(space, zz[..., :d], zz[..., d:])
        return np.nan_to_num(r, nan=0.0)

    val = f(z)
    eye = np.eye(2 * d) * h
    for _ in range(iters):
        grad = np.stack([(f(z + e) - f(z - e)) / (2 * h) for e in eye], axis=1)
        grad -= np.sum(grad * z, axis=1, keepdims=True) * z
        gn = np.linalg.norm(grad, axis=1, keepdims=True)
        moving = gn[:, 0] > 1e-12
        if not np.any(moving):
            break
        cand = z + step[:, None] * grad / np.maximum(gn, 1e-300)
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        cv = f(cand)
        better = (cv > val) & moving
        z[better] = cand[better]
        val[better] = cv[better]
        step = np.where(better, step * 1.2, step * 0.5)
        if np.all(step < 1e-10):
            break
    return z[:, :d], z[:, d:]


def defect(space: NormedSpace, starts: int = 512, seed: int = 0, iters: int = 150) -> DefectReport:
    """Parallelogram defect ``M`` with an attaining pair.

    Polyhedral balls get the exact vertex/facet maximum (globally certified);
    other forms get a seeded multi-start ascent, which certifies only a lower
    bound.
    """
    d = space.dim
    log: list[str] = []
    if d == 0:
        return DefectReport(1.0, (np.zeros(0), np.zeros(0)), True, True, "trivial", ["zero space"])
    e1 = np.eye(d)[0]
    xs = [e1[None, :]]
    ys = [np.zeros((1, d))]
    glob = False
    method = "multi-start ascent"
    if space.is_polyhedral:
        exact = _polyhedral_defect(space)
        if exact is not None:
            m, x, y = exact
            xs.append(x[None, :])
            ys.append(y[None, :])
            glob = True
            method = "vertex/facet pair maximum"
            log.append(f"exact polyhedral maximum over {len(space.ball_vertices())} vertices "
                       f"and {len(space.facet_functionals())} facets")
        else:
            log.append("vertex/facet pair count above cap; sampling only")
    if not glob:
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((starts, 2 * d))
        x0, y0 = _ascent(space, z[:, :d], z[:, d:], iters)
        xs.append(x0)
        ys.append(y0)
        log.append(f"{starts} seeded starts, {iters} ascent iterations")
    xs = np.vstack(xs)
    ys = np.vstack(ys)
    ratios = np.nan_to_num(defect_ratio(space, xs, ys), nan=0.0)
    k = _pick(ratios, xs, ys)
    m = float(ratios[k])
    return DefectReport(m, (xs[k], ys[k]), True, glob, method, log)


@dataclass
class RectangularityReport:
    passed: bool
    refused: bool
    reason: str
    ratios: list[float | None]
    m_value: float

    def to_dict(self) -> dict:
        return {"passed": self.passed, "refused": self.refused, "reason": self.reason,
                "ratios": self.ratios, "m_value": self.m_value}


def extremal_rectangularity(space: NormedSpace, s1: Subspace, s2: Subspace, pair, m_value: float | None = None,
                            eps: float = 1e-6, seed: int = 0) -> RectangularityReport:
    """Both block components of an extremal pair are extremal (or zero)."""
    if m_value is None:
        m_value = defect(space, seed=seed).m_value
    x, y = (np.asarray(p, dtype=float) for p in pair)
    r = float(defect_ratio(space, x, y))
    if not abs(r - m_value) <= eps:
        return RectangularityReport(False, True, f"pair ratio {r:.12g} is not within {eps} of {m_value:.12g}",
                                    [], m_value)
    chk = ns.is_product_decomposition(space, s1, s2, seed=seed)
    if not chk.is_product:
        return RectangularityReport(False, True, "subspaces are not a product decomposition", [], m_value)
    p1, p2 = projector(s1, s2), projector(s2, s1)
    ratios: list[float | None] = []
    ok = True
    scale = max(np.linalg.norm(x), np.linalg.norm(y))
    for p in (p1, p2):
        xi, yi = p @ x, p @ y
        if max(np.linalg.norm(xi), np.linalg.norm(yi)) <= 1e-12 * scale:
            ratios.append(None)
            continue
        ri = float(defect_ratio(space, xi, yi))
        ratios.append(ri)
        ok = ok and abs(ri - m_value) <= eps
    return RectangularityReport(ok, False, "components extremal" if ok else "a component is not extremal",
                                ratios, m_value)


# ---- projection pairs ----------------------------------------------------------------------

@dataclass
class ProjectionPair:
    """Two splittings ``V = A + Abar = B + Bbar`` of one normed space."""

    space: NormedSpace
    a: Subspace
    abar: Subspace
    b: Subspace
    bbar: Subspace
    verify: bool = True
    samples: int = 512
    seed: int = 0
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.space.dim
        for s, t, name in [(self.a, self.abar, "A, Abar"), (self.b, self.bbar, "B, Bbar")]:
            if not is_direct_sum(s, t, n):
                raise RefusalError(f"{name} is not a direct-sum splitting")
            if self.verify:
                chk = ns.is_product_decomposition(self.space, s, t, self.samples, self.seed)
                self.residuals[name] = chk.worst_residual
                if not chk.is_product:
                    raise RefusalError(f"{name} is not a product decomposition "
                                       f"(residual {chk.worst_residual:.3e})")

    def proj(self, which: str) -> np.ndarray:
        s = {"a": (self.a, self.abar), "abar": (self.abar, self.a),
             "b": (self.b, self.bbar), "bbar": (self.bbar, self.b)}[which]
        return projector(*s)

    def intersections(self) -> dict[str, int]:
        return {f"{p} cap {q}": intersect(s, t).dim
                for (p, s), (q, t) in itertools.product([("A", self.a), ("Abar", self.abar)],
                                                        [("B", self.b), ("Bbar", self.bbar)])}

    def is_transversal(self) -> bool:
        return all(v == 0 for v in self.intersections().values())

    def require_transversal(self):
        bad = {k: v for k, v in self.intersections().items() if v}
        if bad:
            raise RefusalError("decompositions are not transversal: " +
                               ", ".join(f"{k} has dimension {v}" for k, v in sorted(bad.items())))

    def q_matrix(self) -> np.ndarray:
        """``P^A P^B`` restricted to ``A``, in the coordinates of ``A.basis``."""
        img = self.proj("a") @ self.proj("b") @ self.a.basis
        return coordinates(self.a, img.T).T


@dataclass
class EigenReport:
    lambda_: float
    vector: np.ndarray
    residual: float
    variational_value: float
    algebraic_top: float
    norm_identity_residual: float
    in_open_interval: bool

    def to_dict(self) -> dict:
        return {"lambda": self.lambda_, "vector": self.vector.tolist(), "residual": self.residual,
                "variational_value": self.variational_value, "algebraic_top": self.algebraic_top,
                "norm_identity_residual": self.norm_identity_residual,
                "in_open_interval": self.in_open_interval}


def composed_projection_eigen(pp: ProjectionPair, starts: int = 64, seed: int = 0,
                              power_iters: int = 500) -> EigenReport:
    """Eigenvector of ``Q`` found by maximizing ``|P^B x| / |x|`` over ``A``.

    Candidates come from seeded normalized ``Q``-iteration plus the
    eigenvectors of ``Q``; the best ratio wins and is compared with the top
    eigenvalue computed algebraically.
    """
    pp.require_transversal()
    q = pp.q_matrix()
    k = pp.a.dim
    pb = pp.proj("b")
    rng = np.random.default_rng(seed)
    cands = rng.standard_normal((starts, k))
    for _ in range(power_iters):
        nxt = cands @ q.T
        nxt /= np.linalg.norm(nxt, axis=1, keepdims=True)
        if np.max(np.abs(nxt - cands)) < 1e-15:
            break
        cands = nxt
    evals, evecs = np.linalg.eig(q)
    real = np.abs(evals.imag) < 1e-12
    cands = np.vstack([cands, evecs[:, real].real.T])
    amb = cands @ pp.a.basis.T
    ratio = ns.norm(pp.space, amb @ pb.T) / ns.norm(pp.space, amb)
    best = int(np.argmax(ratio))
    v = cands[best] / np.linalg.norm(cands[best])
    lam = float(ratio[best] ** 2)
    resid = float(np.linalg.norm(q @ v - lam * v))
    top = float(np.max(evals[real].real)) if np.any(real) else float("nan")
    a_vec = pp.a.basis @ v
    ident = float(abs(ns.norm(pp.space, pb @ a_vec) - np.sqrt(lam) * ns.norm(pp.space, a_vec)))
    return EigenReport(lam, a_vec / ns.norm(pp.space, a_vec), resid, float(ratio[best]), top, ident,
                       0.0 < lam < 1.0)


# ---- Lemma unique and the strike chain ------------------------------------------------------

@dataclass
class UniqueReport:
    passed: bool
    refused: bool
    reason: str
    lambda_: float
    s: float
    identity_residual: float
    isometry_residual: float
    product_identity_residual: float
    loewner_deviation: float | None
    worst_pair: tuple | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "refused": self.refused, "reason": self.reason,
                "lambda": self.lambda_, "s": self.s, "identity_residual": self.identity_residual,
                "isometry_residual": self.isometry_residual,
                "product_identity_residual": self.product_identity_residual,
                "loewner_deviation": self.loewner_deviation,
                "worst_pair": [np.asarray(p).tolist() for p in self.worst_pair] if self.worst_pair else None}


def loewner_deviation(space: NormedSpace, samples: int = 2000, seed: int = 0) -> float:
    """Largest relative gap between the norm and the Löwner ellipsoid's norm."""
    e = max_inscribed_ellipsoid(space, method="generic", seed=seed).ellipsoid
    v = np.random.default_rng(seed).standard_normal((samples, space.dim))
    ell = np.sqrt(np.einsum("ni,ij,nj->n", v, e.shape, v))
    return float(np.max(np.abs(ns.norm(space, v) / ell - 1.0)))


def check_lemma_unique(pp: ProjectionPair, lam: float | None = None, samples: int = 512, seed: int = 0,
                       tol: float = 1e-8, confirm: bool = True) -> UniqueReport:
    """Generalized parallelogram identity ``(1+s^2)(|x|^2+|y|^2) = |x-sy|^2 + |sx+y|^2`` on ``A``."""
    pp.require_transversal()
    q = pp.q_matrix()
    if lam is None:
        lam = float(np.trace(q) / len(q))
    dev = float(np.max(np.abs(q - lam * np.eye(len(q)))))
    if dev > 1e-8:
        return UniqueReport(False, True, f"Q is not lambda * Id (deviation {dev:.3e})", lam, float("nan"),
                            float("nan"), float("nan"), float("nan"), None)
    if not 0.0 < lam < 1.0:
        return UniqueReport(False, True, f"lambda = {lam} outside (0, 1)", lam, float("nan"),
                            float("nan"), float("nan"), float("nan"), None)
    sp = pp.space
    s = float(np.sqrt((1.0 - lam) / lam))
    iso = pp.proj("abar") @ pp.proj("b") / np.sqrt(lam * (1.0 - lam))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, pp.a.dim)) @ pp.a.basis.T
    y = rng.standard_normal((samples, pp.a.dim)) @ pp.a.basis.T
    lhs = (1 + s * s) * (ns.norm_sq(sp, x) + ns.norm_sq(sp, y))
    rhs = ns.norm_sq(sp, x - s * y) + ns.norm_sq(sp, s * x + y)
    rel = np.abs(lhs - rhs) / lhs
    k = int(np.argmax(rel))
    iso_res = float(np.max(np.abs(ns.norm(sp, x @ iso.T) / ns.norm(sp, x) - 1.0)))
    # the same identity read in C through the identification of A with Abar
    lhs_c = ns.norm_sq(sp, x + s * (x @ iso.T)) + ns.norm_sq(sp, -s * y + y @ iso.T)
    rhs_c = ns.norm_sq(sp, (x - s * y) + (s * x + y) @ iso.T)
    prod_res = float(np.max(np.abs(lhs_c - rhs_c) / lhs_c))
    ident_ok = float(rel[k]) <= tol
    dev_l = loewner_deviation(sp, seed=seed) if (confirm and ident_ok) else None
    ok = ident_ok and (dev_l is None or dev_l <= EUCLID_TOL)
    reason = ("identity holds" + (", Euclidean confirmed" if dev_l is not None else "")) if ok else \
        ("identity violated" if not ident_ok else "Löwner deviation too large")
    return UniqueReport(ok, False, reason, lam, s, float(rel[k]), iso_res, prod_res, dev_l, (x[k], y[k]))


@dataclass
class StrikeVerdict:
    verdict: str
    m_value: float
    loewner_deviation: float | None
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "m_value": self.m_value, "loewner_deviation": self.loewner_deviation,
                "data": self.data}


def square_pair(pp: ProjectionPair) -> ProjectionPair:
    """The same splittings on the l2 square ``V x V``."""
    sq = ns.product([pp.space, pp.space])
    n = pp.space.dim

    def twice(s: Subspace) -> Subspace:
        z = np.zeros_like(s.basis)
        return Subspace(np.hstack([np.vstack([s.basis, z]), np.vstack([z, s.basis])]))

    return ProjectionPair(sq, twice(pp.a), twice(pp.abar), twice(pp.b), twice(pp.bbar), verify=False)


def check_strike(pp: ProjectionPair, starts: int = 512, seed: int = 0) -> StrikeVerdict:
    """Transversal product splittings force a Euclidean norm.

    Confirmation needs the defect within ``1 + 1e-6`` and the Löwner
    deviation within ``1e-6``.  Otherwise the chain continues with an
    eigenvector of the squared composed projection and reports the subspaces
    it produces; on genuinely transversal input that branch signals a
    numerical or input inconsistency.
    """
    pp.require_transversal()
    rep = defect(pp.space, starts=starts, seed=seed)
    dev = loewner_deviation(pp.space, seed=seed)
    if rep.m_value <= 1 + EUCLID_TOL and dev <= EUCLID_TOL:
        return StrikeVerdict("euclidean_confirmed", rep.m_value, dev,
                             {"defect_method": rep.method, "intersections": pp.intersections()})
    sq = square_pair(pp)
    eig = composed_projection_eigen(sq, seed=seed)
    v = eig.vector
    n = pp.space.dim
    l_sub = Subspace.from_vectors([sq.proj("b") @ v, sq.proj("bbar") @ v], 2 * n)
    first = Subspace.from_vectors(l_sub.basis[:n].T, n)
    second = Subspace.from_vectors(l_sub.basis[n:].T, n)
    tilde = span_sum(first, second)
    sub_defect = defect(ns.restricted(pp.space, tilde.basis), starts=64, seed=seed).m_value if tilde.dim else 1.0
    return StrikeVerdict("counterexample_data", rep.m_value, dev, {
        "inconsistent": True, "extremal_pair": [p.tolist() for p in rep.extremal_pair],
        "eigen": eig.to_dict(), "span_dim": l_sub.dim, "first_projection_dim": first.dim,
        "second_projection_dim": second.dim, "combined_dim": tilde.dim, "combined_defect": sub_defect})


@dataclass
class MainInterReport:
    passed: bool
    intersection: Subspace
    complement: Subspace | None
    residual: float
    unbound_case: bool
    reason: str

    def to_dict(self) -> dict:
        return {"passed": self.passed, "intersection_dim": self.intersection.dim,
                "intersection": self.intersection.to_list(),
                "complement": self.complement.to_list() if self.complement is not None else None,
                "residual": self.residual, "unbound_case": self.unbound_case, "reason": self.reason}


def _complement_candidates(space: NormedSpace, pp: ProjectionPair, f: Subspace, cap: int = 2000):
    b = pp.b
    k = b.dim - f.dim
    yield intersect(b, pp.abar)
    pb = pp.proj("b")
    dirs = [pb @ leaf_b[:, i] for _, leaf_b in ns.leaf_components(space) for i in range(leaf_b.shape[1])]
    dirs += list(ns.critical_directions(space) @ pb.T)
    dirs = [d for d in dirs if np.linalg.norm(d) > 1e-12]
    for count, combo in enumerate(itertools.combinations(range(len(dirs)), k)):
        if count >= cap:
            break
        yield Subspace.from_vectors([dirs[i] for i in combo], space.dim)


def check_maininter_unbound(space: NormedSpace, pp: ProjectionPair, seed: int = 0) -> MainInterReport:
    """``A cap B`` is a product factor of ``B``; transversal-to-A case is structural."""
    f = intersect(pp.a, pp.b)
    b = pp.b
    unbound = intersect(b, pp.a).dim == 0 and intersect(b, pp.abar).dim == 0
    if f.dim == 0 or f.dim == b.dim:
        why = "intersection is trivial" if f.dim == 0 else "intersection is all of B"
        if unbound:
            why += "; B meets A and Abar trivially, B is a subspace hence linear"
        return MainInterReport(True, f, Subspace.zero(space.dim) if f.dim == b.dim else b, 0.0, unbound, why)
    restricted = ns.restricted(space, b.basis)
    f_coords = Subspace(coordinates(b, f.basis.T).T)
    best = (np.inf, None)
    for g in _complement_candidates(space, pp, f):
        if g.dim != b.dim - f.dim or span_sum(f, g).dim != b.dim:
            continue
        g_coords = Subspace(coordinates(b, g.basis.T).T)
        chk = ns.is_product_decomposition(restricted, f_coords, g_coords, seed=seed)
        if chk.worst_residual < best[0]:
            best = (chk.worst_residual, g)
        if chk.is_product:
            return MainInterReport(True, f, g, chk.worst_residual, unbound, "intersection is a factor of B")
    return MainInterReport(False, f, best[1], float(best[0]), unbound, "no complementary factor found")


def candidate_decompositions(space: NormedSpace, seed: int = 0) -> list[tuple[Subspace, Subspace]]:
    """Component-spanned splittings that pass the product test."""
    return [(s1, s2) for s1, s2 in ns.candidate_splits(space)
            if ns.is_product_decomposition(space, s1, s2, seed=seed).is_product]
