"""Product calculus on finite metric spaces.

A :class:`ProductWitness` records a splitting ``X = Y x Ybar`` by giving each
point its two coordinates.  Fibers, projections, slopes and rectangularity are
read off those labels; :func:`assemble_from_fibers` goes the other way and
builds a witness from an equidistant family of fibers with matchings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .metric_core import FiniteMetricSpace, StructuralError, Tolerance


class WitnessError(ValueError):
    """A proposed product structure fails one of its defining identities."""

    def __init__(self, message: str, offending=None, residual: float | None = None):
        super().__init__(message)
        self.offending = offending
        self.residual = residual


class FiberSystemError(WitnessError):
    pass


def _same_space(a: FiniteMetricSpace, b: FiniteMetricSpace) -> bool:
    return a is b or (a.labels == b.labels and np.array_equal(a.dist, b.dist))


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber so indices appear in order of first occurrence."""
    mapping: dict[int, int] = {}
    out = np.empty(len(labels), dtype=int)
    for k, v in enumerate(labels):
        out[k] = mapping.setdefault(int(v), len(mapping))
    return out


class ProductWitness:
    """Coordinates realizing ``space = Y x Ybar``.

    ``y_label[p]`` is the index of ``P^Y(p)`` in ``Y`` and ``ybar_label[p]``
    the index of ``P^Ybar(p)`` in ``Ybar``.  Construction checks the grid
    bijection, consistency of the factor metrics across fibers and the
    Pythagorean identity; failures raise :class:`WitnessError`.
    """

    def __init__(self, space: FiniteMetricSpace, y_label, ybar_label,
                 tol: Tolerance | None = None, check: bool = True):
        self.space = space
        self.tol = tol or space.tolerance()
        y = np.asarray(y_label, dtype=int)
        yb = np.asarray(ybar_label, dtype=int)
        if y.shape != (space.n,) or yb.shape != (space.n,):
            raise StructuralError("labels must assign every point exactly once")
        self.y_label = _canonical_labels(y)
        self.ybar_label = _canonical_labels(yb)
        self.ny = int(self.y_label.max()) + 1
        self.nybar = int(self.ybar_label.max()) + 1
        grid = -np.ones((self.ny, self.nybar), dtype=int)
        for p, (i, j) in enumerate(zip(self.y_label, self.ybar_label)):
            if grid[i, j] >= 0:
                raise WitnessError("two points share the grid cell", offending=(int(grid[i, j]), p))
            grid[i, j] = p
        if np.any(grid < 0):
            i, j = np.argwhere(grid < 0)[0]
            raise WitnessError("grid cell without a point", offending=(int(i), int(j)))
        self.grid = grid
        self.dy, self.dybar = self._factor_metrics()
        if check:
            res, where = self.pythagoras_residual()
            if res > self.tol.tol_sq:
                raise WitnessError("Pythagorean identity fails", offending=where, residual=res)

    # -- factor metrics ---------------------------------------------------
    def _factor_metrics(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.space.dist
        t = self.tol.tol_metric
        # d(grid[i, j], grid[i', j]) for every Ybar index j
        rows = d[self.grid[:, None, :], self.grid[None, :, :]]  # (ny, ny, nybar)
        dy = rows[:, :, 0]
        spread = np.abs(rows - dy[:, :, None])
        if spread.size and spread.max() > t:
            i, k, j = np.unravel_index(np.argmax(spread), spread.shape)
            raise WitnessError("Y-fibers are not isometric under the grid matching",
                               offending=(int(i), int(k), int(j)), residual=float(spread.max()))
        cols = d[self.grid.T[:, None, :], self.grid.T[None, :, :]]  # (nybar, nybar, ny)
        dyb = cols[:, :, 0]
        spread = np.abs(cols - dyb[:, :, None])
        if spread.size and spread.max() > t:
            j, k, i = np.unravel_index(np.argmax(spread), spread.shape)
            raise WitnessError("Ybar-fibers are not isometric under the grid matching",
                               offending=(int(j), int(k), int(i)), residual=float(spread.max()))
        return dy.copy(), dyb.copy()

    def pythagoras_residual(self) -> tuple[float, tuple[int, int] | None]:
        sq = self.space.sq
        pred = (self.dy ** 2)[self.y_label[:, None], self.y_label[None, :]] + \
            (self.dybar ** 2)[self.ybar_label[:, None], self.ybar_label[None, :]]
        res = np.abs(sq - pred)
        if res.size == 0:
            return 0.0, None
        k = int(np.argmax(res))
        return float(res.flat[k]), (k // self.space.n, k % self.space.n)

    # -- fibers -------------------------------------------------------------
    def y_fiber(self, x: int) -> np.ndarray:
        """``Y_x``: points sharing the Ybar-coordinate of ``x``."""
        return np.nonzero(self.ybar_label == self.ybar_label[x])[0]

    def ybar_fiber(self, x: int) -> np.ndarray:
        """``Ybar_x``: points sharing the Y-coordinate of ``x``."""
        return np.nonzero(self.y_label == self.y_label[x])[0]

    @property
    def is_trivial(self) -> bool:
        return self.ny == 1 or self.nybar == 1

    def swapped(self) -> ProductWitness:
        return ProductWitness(self.space, self.ybar_label, self.y_label, self.tol, check=False)

    def partitions(self) -> tuple[frozenset, frozenset]:
        """(Y-fibers, Ybar-fibers) as frozensets of point sets."""
        yf = frozenset(frozenset(np.nonzero(self.ybar_label == j)[0].tolist()) for j in range(self.nybar))
        ybf = frozenset(frozenset(np.nonzero(self.y_label == i)[0].tolist()) for i in range(self.ny))
        return yf, ybf

    def key(self) -> frozenset:
        """Identity of the splitting up to factor swap and relabeling."""
        return frozenset(self.partitions())

    def canonical(self) -> ProductWitness:
        """Lexicographically minimal labeling over swaps (renumbering already canonical)."""
        a = (tuple(self.y_label), tuple(self.ybar_label))
        b = (tuple(self.ybar_label), tuple(self.y_label))
        return self if a <= b else self.swapped()

    def to_dict(self) -> dict:
        labels = self.space.labels
        return {"y_label": {labels[p]: int(v) for p, v in enumerate(self.y_label)},
                "ybar_label": {labels[p]: int(v) for p, v in enumerate(self.ybar_label)}}

    @classmethod
    def from_dict(cls, space: FiniteMetricSpace, data: Mapping, tol: Tolerance | None = None) -> ProductWitness:
        try:
            y = [data["y_label"][lab] for lab in space.labels]
            yb = [data["ybar_label"][lab] for lab in space.labels]
        except KeyError as exc:
            raise StructuralError(f"witness does not label point {exc.args[0]!r}") from None
        return cls(space, y, yb, tol)

    def __repr__(self):
        return f"ProductWitness({self.ny} x {self.nybar} on {self.space.n} points)"


def trivial_witness(space: FiniteMetricSpace) -> ProductWitness:
    return ProductWitness(space, np.arange(space.n), np.zeros(space.n, dtype=int))


def induced_factors(w: ProductWitness, base: int = 0) -> tuple[FiniteMetricSpace, FiniteMetricSpace]:
    """The factors ``Y`` and ``Ybar``, read off the fibers through ``base``.

    ``Y`` point ``i`` carries the label of the point of ``Y_base`` with
    Y-coordinate ``i``; likewise for ``Ybar``.
    """
    j0, i0 = w.ybar_label[base], w.y_label[base]
    ylabels = [w.space.labels[w.grid[i, j0]] for i in range(w.ny)]
    yblabels = [w.space.labels[w.grid[i0, j]] for j in range(w.nybar)]
    return FiniteMetricSpace(ylabels, w.dy), FiniteMetricSpace(yblabels, w.dybar)


# ---- recognition of products ------------------------------------------------

@dataclass
class FiberSystem:
    """Fibers ``Y_i`` (ordered point-index lists) with matchings ``P_ij``.

    ``matchings[(i, j)][k]`` is the position in fiber ``j`` of the image of
    ``fibers[i][k]``.
    """

    space: FiniteMetricSpace
    fibers: list[list[int]]
    matchings: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    @classmethod
    def aligned(cls, space: FiniteMetricSpace, fibers) -> FiberSystem:
        """Fibers listed in corresponding order; every matching is positional."""
        fibers = [list(map(int, f)) for f in fibers]
        p = len(fibers[0]) if fibers else 0
        ident = np.arange(p)
        m = {(i, j): ident for i in range(len(fibers)) for j in range(len(fibers))}
        return cls(space, fibers, m)


def assemble_from_fibers(fs: FiberSystem, tol: Tolerance | None = None) -> ProductWitness:
    """Recognize a product from an equidistant family of fibers.

    Checks the composition law and the Pythagorean condition, reads the base
    pseudo-metric ``d(i, j) = d(x, P_ij x)`` (which must not depend on ``x``),
    identifies fibers at base distance zero, and returns the witness of
    ``Y_o x J`` with ``P(y, i) = P_oi(y)``.
    """
    space = fs.space
    tol = tol or space.tolerance()
    fibers = [np.asarray(f, dtype=int) for f in fs.fibers]
    m = len(fibers)
    if m == 0:
        raise FiberSystemError("empty fiber system")
    p = len(fibers[0])
    if any(len(f) != p for f in fibers):
        raise FiberSystemError("fibers differ in cardinality")
    for f in fibers:
        if len(set(f.tolist())) != p:
            raise FiberSystemError("fiber lists a point twice", offending=f.tolist())

    ident = np.arange(p)
    mt: dict[tuple[int, int], np.ndarray] = {}
    for i in range(m):
        for j in range(m):
            perm = fs.matchings.get((i, j))
            if perm is None:
                if i != j:
                    raise FiberSystemError("missing matching", offending=(i, j))
                perm = ident
            perm = np.asarray(perm, dtype=int)
            if sorted(perm.tolist()) != ident.tolist():
                raise FiberSystemError("matching is not a bijection", offending=(i, j))
            mt[(i, j)] = perm

    for i in range(m):
        for j in range(m):
            if not np.array_equal(mt[(j, i)][mt[(i, j)]], ident):
                raise FiberSystemError("P_ji o P_ij is not the identity", offending=(i, j))
            for k in range(m):
                if not np.array_equal(mt[(j, k)][mt[(i, j)]], mt[(i, k)]):
                    raise FiberSystemError("composition law P_jk o P_ij = P_ik fails", offending=(i, j, k))

    sq = space.sq
    d = space.dist
    base = np.zeros((m, m))
    for i in range(m):
        fi = fibers[i]
        for j in range(m):
            fj = fibers[j]
            img = fj[mt[(i, j)]]
            to_img = sq[fi, img]
            pred = to_img[:, None] + sq[img[:, None], fj[None, :]]
            res = np.abs(sq[fi[:, None], fj[None, :]] - pred)
            if res.max() > tol.tol_sq:
                a, b = np.unravel_index(np.argmax(res), res.shape)
                raise FiberSystemError("Pythagorean condition fails",
                                       offending=(i, j, int(fi[a]), int(fj[b])), residual=float(res.max()))
            h = d[fi, img]
            if h.max() - h.min() > tol.tol_metric:
                raise FiberSystemError("d(x, P_ij x) depends on x", offending=(i, j),
                                       residual=float(h.max() - h.min()))
            base[i, j] = h.mean()

    # identify fibers at base distance zero
    cls = -np.ones(m, dtype=int)
    reps: list[int] = []
    for i in range(m):
        if cls[i] >= 0:
            continue
        cls[i] = len(reps)
        reps.append(i)
        for j in range(i + 1, m):
            if cls[j] < 0 and base[i, j] <= tol.tol_metric:
                if set(fibers[i].tolist()) != set(fibers[j].tolist()):
                    raise FiberSystemError("fibers at distance 0 are different sets", offending=(i, j))
                cls[j] = cls[i]

    o = reps[0]
    y_label = -np.ones(space.n, dtype=int)
    ybar_label = -np.ones(space.n, dtype=int)
    for c, r in enumerate(reps):
        # P(y, c) = P_or(y) for y at position k of Y_o
        pts = fibers[r][mt[(o, r)]]
        for k, pt in enumerate(pts):
            if y_label[pt] >= 0:
                raise FiberSystemError("distinct fibers overlap", offending=(int(pt),))
            y_label[pt], ybar_label[pt] = k, c
    if np.any(y_label < 0):
        raise FiberSystemError("fibers do not cover the space",
                               offending=tuple(np.nonzero(y_label < 0)[0].tolist()))
    try:
        return ProductWitness(space, y_label, ybar_label, tol)
    except WitnessError as exc:
        raise FiberSystemError(f"assembled map is not an isometry: {exc}",
                               offending=exc.offending, residual=exc.residual) from exc


def fiber_system_of(w: ProductWitness) -> FiberSystem:
    """The Y-fibers of a witness, ordered by Y-coordinate."""
    return FiberSystem.aligned(w.space, [w.grid[:, j].tolist() for j in range(w.nybar)])


# ---- checks ------------------------------------------------------------------

@dataclass
class CheckReport:
    passed: bool
    worst_residual: float
    worst: tuple | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_residual": self.worst_residual,
                "worst": list(self.worst) if self.worst is not None else None, **self.details}


def _require_same_space(w1: ProductWitness, w2: ProductWitness):
    if not _same_space(w1.space, w2.space):
        raise StructuralError("witnesses live on different spaces")


def check_interbase(w1: ProductWitness, w2: ProductWitness, x: int) -> CheckReport:
    """For ``p`` in ``Ybar_x`` and ``q`` in ``F_x = Y_x & Z_x``, ``P^Z x`` lies
    between ``P^Z p`` and ``P^Z q`` in the squared sense."""
    _require_same_space(w1, w2)
    f_x = np.intersect1d(w1.y_fiber(x), w2.y_fiber(x))
    ybar_x = w1.ybar_fiber(x)
    dz2 = w2.dy ** 2
    zp = w2.y_label[ybar_x][:, None]
    zq = w2.y_label[f_x][None, :]
    zx = w2.y_label[x]
    res = np.abs(dz2[zp, zq] - dz2[zp, zx] - dz2[zx, zq])
    a, b = np.unravel_index(np.argmax(res), res.shape)
    worst = float(res[a, b])
    return CheckReport(worst <= w1.tol.tol_sq, worst, (int(ybar_x[a]), int(f_x[b])),
                       {"f_x": f_x.tolist()})


@dataclass(frozen=True)
class Slope:
    a: float
    a_bar: float


def slope(w: ProductWitness, x: int, z: int) -> Slope:
    if x == z:
        raise ValueError("slope of a degenerate segment (x == z)")
    dxz = w.space.dist[x, z]
    a = w.dy[w.y_label[x], w.y_label[z]] / dxz
    ab = w.dybar[w.ybar_label[x], w.ybar_label[z]] / dxz
    if abs(a * a + ab * ab - 1.0) > max(w.tol.tol_sq, 1e-9):
        raise WitnessError("slopes do not satisfy a^2 + abar^2 = 1", offending=(x, z),
                           residual=abs(a * a + ab * ab - 1.0))
    return Slope(float(a), float(ab))


def is_rectangular(w: ProductWitness, s) -> bool:
    s = sorted(set(int(v) for v in s))
    if not s:
        raise ValueError("rectangularity of the empty set is not defined here")
    ys = set(w.y_label[s].tolist())
    ybs = set(w.ybar_label[s].tolist())
    cells = {(int(w.y_label[p]), int(w.ybar_label[p])) for p in s}
    return len(cells) == len(ys) * len(ybs)


@dataclass
class PropertyOReport:
    splits: bool
    surjective: bool
    f_x: list[int]
    t_points: list[int]
    image_size: int
    z_size: int
    fiber_count: int

    @property
    def passed(self) -> bool:
        return self.splits and self.surjective

    def to_dict(self) -> dict:
        return {"passed": self.passed, "splits": self.splits, "surjective": self.surjective,
                "f_x": self.f_x, "t_points": self.t_points, "image_size": self.image_size,
                "z_size": self.z_size, "fiber_count": self.fiber_count}


def check_property_O(w_yz: ProductWitness, w_zz: ProductWitness, x: int) -> PropertyOReport:
    """Split ``P^Z(T)`` with ``T = P^Y(F_x) x Ybar`` and test ``P^Z(T) = Z``.

    (a) the family ``{P^Z(F_p) : p in T}``, matched along Ybar-fibers, is
    handed to :func:`assemble_from_fibers`; its failure propagates.
    (b) surjectivity of ``P^Z`` on ``T``.
    """
    _require_same_space(w_yz, w_zz)
    w1, w2 = w_yz, w_zz
    f_x = np.intersect1d(w1.y_fiber(x), w2.y_fiber(x))
    fy = sorted(set(w1.y_label[f_x].tolist()))
    t_pts = np.nonzero(np.isin(w1.y_label, fy))[0]

    # F_p = Y_p & Z_p, keyed by (Ybar-coordinate, Zbar-coordinate)
    groups: dict[tuple[int, int], list[int]] = {}
    for p in t_pts:
        groups.setdefault((int(w1.ybar_label[p]), int(w2.ybar_label[p])), []).append(int(p))

    z_space = FiniteMetricSpace([f"z{i}" for i in range(w2.ny)], w2.dy)
    image = sorted(set(w2.y_label[t_pts].tolist()))
    pos = {z: k for k, z in enumerate(image)}
    sub = z_space.subspace(image)

    fibers = []
    for key, members in groups.items():
        by_y = {int(w1.y_label[q]): q for q in members}
        if sorted(by_y) != fy:
            raise FiberSystemError("F_p is not parallel to F_x (slope equality fails)", offending=key)
        zs = [pos[int(w2.y_label[by_y[y]])] for y in fy]
        if len(set(zs)) != len(zs):
            raise FiberSystemError("P^Z is not injective on F_p", offending=key)
        fibers.append(zs)

    # matchings send P^Z(pbar) to P^Z(qbar), qbar = Ybar_pbar & F_q: positional in fy
    w_split = assemble_from_fibers(FiberSystem.aligned(sub, fibers), tol=Tolerance(w1.tol.tol_metric, w1.tol.tol_sq))

    pz_fx = set(w2.y_label[f_x].tolist())
    pz_ybar = set(w2.y_label[w1.ybar_fiber(x)].tolist())
    splits = (len(image) == len(pz_fx) * len(pz_ybar)
              and w_split.ny == len(pz_fx) and w_split.nybar == len(pz_ybar))
    if splits:
        # P^Z(Ybar_x) must meet every fiber of the splitting once
        cls = {int(w_split.ybar_label[pos[z]]) for z in pz_ybar}
        splits = len(cls) == w_split.nybar
    return PropertyOReport(bool(splits), len(image) == w2.ny, f_x.tolist(), t_pts.tolist(),
                           len(image), w2.ny, len(fibers))
