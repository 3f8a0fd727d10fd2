"""Finding every product decomposition of a finite metric space.

The search works on squared distances.  Fix a base point ``x0``.  For a
splitting ``Y x Ybar`` the fibers through ``x0`` satisfy

    d^2(f, g) = d^2(f, x0) + d^2(x0, g)      for f in Y_x0, g in Ybar_x0,

and each of the two fibers is exactly the set of points "orthogonal at x0" to
every point of the other.  So ``Y_x0 - {x0}`` is a closed set of the
orthogonality relation (an intersection of neighbourhoods), and enumerating
those closed sets enumerates every candidate.  Each candidate is verified in
full by :class:`~derham.product_structure.ProductWitness`.

:func:`brute_force_witnesses` is the independent oracle: it walks every pair
of candidate fibers through ``x0`` of complementary sizes.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metric_core import FiniteMetricSpace, StructuralError, Tolerance, iterated_product
from .product_structure import ProductWitness, WitnessError, induced_factors


class BudgetExceeded(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Budget:
    max_points: int = 24
    max_closed_sets: int = 200_000
    max_isometries: int = 500_000
    brute_force_max_points: int = 12


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DERHAM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class WitnessSearch:
    witnesses: list[ProductWitness]
    complete: bool
    candidates: int

    def keys(self) -> set:
        return {w.key() for w in self.witnesses}


def _orthogonality_masks(space: FiniteMetricSpace, x0: int, tol: Tolerance) -> list[int]:
    sq = space.sq
    n = space.n
    res = np.abs(sq - sq[:, [x0]] - sq[[x0], :])
    ok = res <= tol.tol_sq
    masks = []
    for u in range(n):
        m = 0
        if u != x0:
            for v in np.nonzero(ok[u])[0]:
                if v != x0 and v != u:
                    m |= 1 << int(v)
        masks.append(m)
    return masks


def _bits(mask: int) -> list[int]:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


def _common_neighbours(mask: int, nbr: list[int], full: int) -> int:
    out = full
    for u in _bits(mask):
        out &= nbr[u]
    return out


def _nearest_labels(space: FiniteMetricSpace, fiber: list[int]) -> np.ndarray:
    sq = space.sq[:, fiber]
    return np.argmin(sq, axis=1)


def _witness_from_base_fibers(space, f_pts, g_pts, tol) -> ProductWitness | None:
    try:
        return ProductWitness(space, _nearest_labels(space, f_pts), _nearest_labels(space, g_pts), tol)
    except WitnessError:
        return None


def _sorted_unique(witnesses) -> list[ProductWitness]:
    seen = {}
    for w in witnesses:
        seen.setdefault(w.key(), w.canonical())
    return sorted(seen.values(), key=lambda w: (tuple(w.y_label), tuple(w.ybar_label)))


def enumerate_witnesses(space: FiniteMetricSpace, budget: Budget | None = None,
                        tol: Tolerance | None = None, method: str = "pruned") -> WitnessSearch:
    """All nontrivial witnesses of ``space``, up to factor swap and relabeling.

    ``method="brute"`` delegates to :func:`brute_force_witnesses`.  A search
    that hits ``budget.max_closed_sets`` returns ``complete=False``.
    """
    budget = budget or Budget()
    tol = tol or space.tolerance()
    n = space.n
    if n > budget.max_points:
        raise BudgetExceeded(f"{n} points exceeds the search cap of {budget.max_points}")
    if method == "brute":
        return brute_force_witnesses(space, tol, budget)
    if method != "pruned":
        raise ValueError(f"unknown search method {method!r}")
    if n < 4:
        return WitnessSearch([], True, 0)

    x0 = 0
    nbr = _orthogonality_masks(space, x0, tol)
    full = ((1 << n) - 1) & ~(1 << x0)

    closed: set[int] = set()
    frontier = [m for m in set(nbr) if m]
    complete = True
    while frontier:
        nxt = []
        for c in frontier:
            if c in closed:
                continue
            closed.add(c)
            if len(closed) > budget.max_closed_sets:
                complete = False
                break
            for u in range(n):
                c2 = c & nbr[u]
                if c2 and c2 not in closed:
                    nxt.append(c2)
        if not complete:
            break
        frontier = nxt

    candidates = []
    for c in sorted(closed):
        g = _common_neighbours(c, nbr, full)
        if not g:
            continue
        p, q = bin(c).count("1") + 1, bin(g).count("1") + 1
        if p * q != n:
            continue
        candidates.append(([x0] + _bits(c), [x0] + _bits(g)))

    def verify(fg):
        return _witness_from_base_fibers(space, fg[0], fg[1], tol)

    if _threads() > 1 and len(candidates) > 8:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            found = list(pool.map(verify, candidates))
    else:
        found = [verify(fg) for fg in candidates]
    return WitnessSearch(_sorted_unique(w for w in found if w is not None), complete, len(candidates))


def brute_force_witnesses(space: FiniteMetricSpace, tol: Tolerance | None = None,
                          budget: Budget | None = None) -> WitnessSearch:
    """Oracle: every pair of fibers ``(F, G)`` through point 0 with
    ``|F| * |G| = n`` and ``F & G = {0}``; cells assigned by testing the
    product distance law against all of ``F`` and ``G``."""
    budget = budget or Budget()
    tol = tol or space.tolerance()
    n = space.n
    if n > budget.brute_force_max_points:
        raise BudgetExceeded(f"brute force limited to {budget.brute_force_max_points} points")
    sq = space.sq
    x0 = 0
    others = list(range(1, n))
    found = []
    count = 0
    for p in range(2, n):
        if n % p:
            continue
        q = n // p
        if q < 2:
            continue
        for fr in itertools.combinations(others, p - 1):
            f = [x0, *fr]
            rest = [v for v in others if v not in fr]
            for gr in itertools.combinations(rest, q - 1):
                count += 1
                g = [x0, *gr]
                # the defining identity on the pairs (f, g) themselves
                if np.any(np.abs(sq[np.ix_(fr, gr)] - sq[x0, fr][:, None] - sq[x0, gr][None, :]) > tol.tol_sq):
                    continue
                w = _assign_cells(space, f, g, tol)
                if w is not None:
                    found.append(w)
    return WitnessSearch(_sorted_unique(found), True, count)


def _assign_cells(space, f, g, tol) -> ProductWitness | None:
    sq = space.sq
    x0 = f[0]
    sf, sg = sq[np.ix_(f, f)], sq[np.ix_(g, g)]
    y_label = np.empty(space.n, dtype=int)
    ybar_label = np.empty(space.n, dtype=int)
    for z in range(space.n):
        hits = []
        for a in range(len(f)):
            for b in range(len(g)):
                ok_f = np.all(np.abs(sq[z, f] - sf[a] - sq[g[b], x0]) <= tol.tol_sq)
                ok_g = np.all(np.abs(sq[z, g] - sq[f[a], x0] - sg[b]) <= tol.tol_sq)
                if ok_f and ok_g:
                    hits.append((a, b))
        if len(hits) != 1:
            return None
        y_label[z], ybar_label[z] = hits[0]
    try:
        return ProductWitness(space, y_label, ybar_label, tol)
    except WitnessError:
        return None


# ---- factorization -------------------------------------------------------------

@dataclass
class FactorizationReport:
    factors: list[FiniteMetricSpace]
    fibers: list[list[int]]
    witness_chain: list[dict]
    irreducible_flags: list[bool]
    unique: bool
    alternative_decompositions: list[list[list[int]]]
    complete: bool
    base_point: int = 0
    space: FiniteMetricSpace | None = None

    def to_dict(self) -> dict:
        labels = self.space.labels if self.space is not None else None

        def lab(idx):
            return [labels[i] for i in idx] if labels else list(idx)

        return {
            "factor_count": len(self.factors),
            "factors": [{"labels": list(f.labels), "dist": f.dist.tolist()} for f in self.factors],
            "fibers_through_base": [lab(f) for f in self.fibers],
            "irreducible_flags": self.irreducible_flags,
            "unique": self.unique,
            "alternative_decompositions": [[lab(f) for f in dec] for dec in self.alternative_decompositions],
            "witness_chain": self.witness_chain,
            "complete": self.complete,
        }


def factorize(space: FiniteMetricSpace, budget: Budget | None = None,
              tol: Tolerance | None = None) -> FactorizationReport:
    """Split recursively into irreducibles and cross-check uniqueness.

    Every maximal decomposition reachable through any witness is collected as
    the set of its factor fibers through the base point; the decomposition is
    reported unique when exactly one such set exists.
    """
    budget = budget or Budget()
    tol = tol or space.tolerance()
    if space.n > budget.max_points:
        raise BudgetExceeded(f"{space.n} points exceeds the search cap of {budget.max_points}")
    x0 = 0
    memo: dict[tuple[int, ...], tuple[set, bool, list]] = {}

    def decompositions(pts: tuple[int, ...]):
        if pts in memo:
            return memo[pts]
        sub = space.subspace(pts)
        if sub.n == 1:
            memo[pts] = ({frozenset()}, True, [])
            return memo[pts]
        search = enumerate_witnesses(sub, budget, tol)
        if not search.witnesses:
            memo[pts] = ({frozenset([frozenset(pts)])}, search.complete, [])
            return memo[pts]
        decs: set = set()
        ok = search.complete
        for w in search.witnesses:
            # pts[0] is the base point of the subspace
            yf = tuple(sorted(pts[i] for i in w.y_fiber(0)))
            ybf = tuple(sorted(pts[i] for i in w.ybar_fiber(0)))
            d1, c1, _ = decompositions(yf)
            d2, c2, _ = decompositions(ybf)
            ok = ok and c1 and c2
            decs |= {a | b for a in d1 for b in d2}
        memo[pts] = (decs, ok, search.witnesses)
        return memo[pts]

    root = tuple(range(space.n))
    decs, complete, _ = decompositions(root)
    ordered = sorted((sorted((sorted(f) for f in dec), key=lambda f: (len(f), f)) for dec in decs),
                     key=lambda dec: [(len(f), f) for f in dec])
    main = ordered[0] if ordered else []
    factors = [space.subspace(f) for f in main]
    flags = [not enumerate_witnesses(space.subspace(f), budget, tol).witnesses if len(f) > 1 else True
             for f in main]

    chain = []

    def record_chain(pts):
        _, _, ws = memo.get(pts, (None, None, []))
        if not ws:
            return
        w = ws[0]
        chain.append({"on": [space.labels[i] for i in pts], "witness": w.to_dict()})
        record_chain(tuple(sorted(pts[i] for i in w.y_fiber(0))))
        record_chain(tuple(sorted(pts[i] for i in w.ybar_fiber(0))))

    record_chain(root)
    return FactorizationReport(factors, [list(f) for f in main], chain, flags, len(ordered) == 1,
                               [list(map(list, d)) for d in ordered[1:]], complete, x0, space)


def factor_coordinates(space: FiniteMetricSpace, fibers: list[list[int]],
                       tol: Tolerance | None = None) -> np.ndarray:
    """``coords[z, i]`` = the point of fiber ``i`` nearest to ``z`` (its projection).

    Raises :class:`WitnessError` if the fibers do not coordinatize ``space``.
    """
    tol = tol or space.tolerance()
    sq = space.sq
    if not fibers:
        if space.n != 1:
            raise WitnessError("no fibers for a space with more than one point")
        return np.zeros((1, 0), dtype=int)
    coords = np.stack([np.asarray(f)[np.argmin(sq[:, f], axis=1)] for f in fibers], axis=1)
    if len({tuple(r) for r in coords.tolist()}) != space.n or math.prod(len(f) for f in fibers) != space.n:
        raise WitnessError("fibers do not coordinatize the space")
    pred = sum(sq[coords[:, i][:, None], coords[:, i][None, :]] for i in range(len(fibers)))
    res = np.abs(sq - pred)
    if res.max() > tol.tol_sq:
        raise WitnessError("product law fails for the fiber coordinates", residual=float(res.max()))
    return coords


# ---- isometries ----------------------------------------------------------------

def _row_signatures(space: FiniteMetricSpace, decimals: int) -> list[tuple]:
    return [tuple(np.round(np.sort(r), decimals)) for r in space.dist]


def _isometries(s1: FiniteMetricSpace, s2: FiniteMetricSpace, tol: float, limit: int | None,
                first_only: bool = False):
    n = s1.n
    if s2.n != n:
        return []
    d1, d2 = s1.dist, s2.dist
    if not np.allclose(np.sort(d1, axis=None), np.sort(d2, axis=None), atol=tol, rtol=0):
        return []
    sig_ok = np.array([[np.allclose(np.sort(d1[i]), np.sort(d2[j]), atol=tol, rtol=0) for j in range(n)]
                       for i in range(n)])
    order = list(range(n))
    img = [-1] * n
    used = [False] * n
    out = []

    def rec(k):
        if limit is not None and len(out) > limit:
            raise BudgetExceeded(f"more than {limit} isometries")
        if k == n:
            out.append(tuple(img))
            return first_only
        i = order[k]
        for v in range(n):
            if used[v] or not sig_ok[i, v]:
                continue
            good = True
            for j in order[:k]:
                if abs(d1[i, j] - d2[v, img[j]]) > tol:
                    good = False
                    break
            if not good:
                continue
            img[i] = v
            used[v] = True
            if rec(k + 1):
                return True
            used[v] = False
            img[i] = -1
        return False

    rec(0)
    return out


def isometry_group(space: FiniteMetricSpace, budget: Budget | None = None,
                   tol: Tolerance | None = None) -> list[tuple[int, ...]]:
    """All distance-preserving permutations (``perm[i]`` is the image of ``i``)."""
    budget = budget or Budget()
    tol = tol or space.tolerance()
    if space.n > budget.max_points:
        raise BudgetExceeded(f"{space.n} points exceeds the search cap of {budget.max_points}")
    return _isometries(space, space, tol.tol_metric, budget.max_isometries)


def find_isometry(s1: FiniteMetricSpace, s2: FiniteMetricSpace, tol: float | None = None):
    """An isometry ``s1 -> s2`` as an index map, or ``None``."""
    if tol is None:
        tol = max(s1.tolerance().tol_metric, s2.tolerance().tol_metric)
    found = _isometries(s1, s2, tol, None, first_only=True)
    return found[0] if found else None


def are_isometric(s1: FiniteMetricSpace, s2: FiniteMetricSpace, tol: float | None = None) -> bool:
    return find_isometry(s1, s2, tol) is not None


def _compose(a, b):
    """(a o b)(i) = a[b[i]]"""
    return tuple(a[i] for i in b)


def generating_set(group: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    if not group:
        return []
    n = len(group[0])
    ident = tuple(range(n))
    gens: list[tuple[int, ...]] = []
    span = {ident}
    for g in sorted(group):
        if g in span:
            continue
        gens.append(g)
        frontier = list(span)
        while frontier:
            nxt = []
            for h in frontier:
                for s in gens:
                    c = _compose(s, h)
                    if c not in span:
                        span.add(c)
                        nxt.append(c)
            frontier = nxt
    return gens


@dataclass
class IsometryGroupReport:
    order: int
    generators: list[tuple[int, ...]]
    factor_group_order: int
    permutation_group_order: int
    exact: bool
    kernel_trivial: bool
    induced_permutations: int
    factor_orders: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"order": self.order, "generators": [list(g) for g in self.generators],
                "factor_group_order": self.factor_group_order,
                "permutation_group_order": self.permutation_group_order,
                "factor_orders": self.factor_orders, "exact": self.exact,
                "kernel_trivial": self.kernel_trivial,
                "induced_permutations": self.induced_permutations}


def verify_exact_sequence(space: FiniteMetricSpace, report: FactorizationReport,
                          budget: Budget | None = None, tol: Tolerance | None = None) -> IsometryGroupReport:
    """Compare ``|Iso(X)|`` with ``prod |Iso(Y_i)| * |P|`` and test the kernel.

    ``P`` is the group of permutations of factor indices that only exchange
    isometric factors.  Each isometry must permute the factor fibers (giving
    the homomorphism onto ``P``), and an isometry fixing the base point and
    each factor fiber through it pointwise must be the identity.
    """
    if not report.unique:
        raise PreconditionError("decomposition is not unique; the exact sequence is not defined")
    if not report.complete:
        raise PreconditionError("factorization search was partial")
    budget = budget or Budget()
    tol = tol or space.tolerance()
    group = isometry_group(space, budget, tol)
    fibers = report.fibers
    k = len(fibers)
    factor_orders = [len(isometry_group(space.subspace(f), budget, tol)) for f in fibers]

    classes: list[int] = []
    reps: list[int] = []
    for i in range(k):
        for c, r in enumerate(reps):
            if are_isometric(space.subspace(fibers[i]), space.subspace(fibers[r]), tol.tol_metric):
                classes.append(c)
                break
        else:
            classes.append(len(reps))
            reps.append(i)
    perm_order = math.prod(math.factorial(classes.count(c)) for c in set(classes)) if k else 1
    factor_order = math.prod(factor_orders) if k else 1

    x0 = report.base_point
    coords = factor_coordinates(space, fibers, tol) if k else np.zeros((space.n, 0), dtype=int)

    def fiber_through(i, w):
        mask = np.ones(space.n, dtype=bool)
        for j in range(k):
            if j != i:
                mask &= coords[:, j] == coords[w, j]
        return frozenset(np.nonzero(mask)[0].tolist())

    induced = set()
    kernel_trivial = True
    ident = tuple(range(space.n))
    for g in group:
        s = []
        for i in range(k):
            image = frozenset(g[p] for p in fibers[i])
            match = [j for j in range(k) if fiber_through(j, g[x0]) == image]
            if len(match) != 1:
                s = None
                break
            s.append(match[0])
        if s is not None:
            induced.add(tuple(s))
        fixes = g[x0] == x0 and all(g[p] == p for f in fibers for p in f)
        if fixes and g != ident:
            kernel_trivial = False
    allowed = {s for s in itertools.permutations(range(k)) if all(classes[s[i]] == classes[i] for i in range(k))}
    hom_ok = induced == allowed
    exact = len(group) == factor_order * perm_order and kernel_trivial and hom_ok
    return IsometryGroupReport(len(group), generating_set(group), factor_order, perm_order,
                               exact, kernel_trivial, len(induced), factor_orders)


def recovered_factors_match(found: list[FiniteMetricSpace], planted: list[FiniteMetricSpace]) -> bool:
    """Multiset equality up to isometry."""
    if len(found) != len(planted):
        return False
    pool = list(planted)
    for f in found:
        for k, p in enumerate(pool):
            if are_isometric(f, p):
                pool.pop(k)
                break
        else:
            return False
    return True


def reconstruct(report: FactorizationReport) -> FiniteMetricSpace:
    return iterated_product(report.factors)


__all__ = [
    "Budget", "BudgetExceeded", "PreconditionError", "WitnessSearch", "enumerate_witnesses",
    "brute_force_witnesses", "FactorizationReport", "factorize", "factor_coordinates",
    "isometry_group", "find_isometry", "are_isometric", "generating_set", "IsometryGroupReport",
    "verify_exact_sequence", "recovered_factors_match", "reconstruct", "induced_factors",
    "StructuralError",
]
