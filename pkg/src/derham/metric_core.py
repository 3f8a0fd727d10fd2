"""Finite metric spaces, their validation, and the l2 product.

A product ``Y x Z`` carries the metric ``sqrt(d_Y^2 + d_Z^2)``; on squared
distances that law is additive, which is what the factorization search works
with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class StructuralError(ValueError):
    """Input has the wrong shape or refers to things that do not exist.

    Distinct from a metric violation, which is a legitimate "no" answer.
    """


@dataclass(frozen=True)
class Tolerance:
    tol_metric: float
    tol_sq: float

    def __post_init__(self):
        if not (self.tol_metric > 0 and self.tol_sq > 0):
            raise ValueError("tolerances must be strictly positive")

    @classmethod
    def for_space(cls, space: FiniteMetricSpace, rel: float = 1e-9) -> Tolerance:
        m = float(space.dist.max()) if space.n > 1 else 1.0
        m = m if m > 0 else 1.0
        return cls(rel * m, rel * m * m)


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    labels: tuple[str, ...]
    dist: np.ndarray

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise StructuralError(f"distance matrix must be square, got shape {d.shape}")
        labels = tuple(str(x) for x in self.labels)
        if len(labels) != d.shape[0]:
            raise StructuralError(
                f"{len(labels)} labels for a {d.shape[0]}x{d.shape[0]} distance matrix")
        if len(set(labels)) != len(labels):
            raise StructuralError("labels must be distinct")
        d.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def sq(self) -> np.ndarray:
        return squared_space(self)

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise StructuralError(f"unknown point label {label!r}") from None

    def subspace(self, indices) -> FiniteMetricSpace:
        idx = list(indices)
        return FiniteMetricSpace([self.labels[i] for i in idx], self.dist[np.ix_(idx, idx)])

    def permuted(self, perm) -> FiniteMetricSpace:
        """Reorder points so that new point ``k`` is old point ``perm[k]``."""
        return self.subspace(perm)

    def tolerance(self) -> Tolerance:
        return Tolerance.for_space(self)

    def __repr__(self):
        return f"FiniteMetricSpace(n={self.n}, labels={list(self.labels)[:6]}{'...' if self.n > 6 else ''})"


@dataclass
class ValidationReport:
    ok: bool
    violations: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations}


def validate(space: FiniteMetricSpace, tol: Tolerance | None = None,
             max_reported: int = 50) -> ValidationReport:
    tol = tol or Tolerance.for_space(space)
    d = space.dist
    n = space.n
    out: list[dict] = []
    t = tol.tol_metric

    diag = np.nonzero(np.abs(np.diag(d)) > t)[0]
    out += [{"kind": "diagonal", "points": [space.labels[i]], "value": float(d[i, i])} for i in diag]

    iu = np.triu_indices(n, 1)
    asym = np.abs(d - d.T)[iu] > t
    for i, j in zip(iu[0][asym], iu[1][asym]):
        out.append({"kind": "asymmetry", "points": [space.labels[i], space.labels[j]],
                    "value": float(abs(d[i, j] - d[j, i]))})
    nonpos = d[iu] <= t
    for i, j in zip(iu[0][nonpos], iu[1][nonpos]):
        out.append({"kind": "positivity", "points": [space.labels[i], space.labels[j]],
                    "value": float(d[i, j])})

    # d(i,k) <= d(i,j) + d(j,k) for every middle point j
    # excess[i, j, k] = d(i,k) - d(i,j) - d(j,k)
    excess = d[:, None, :] - d[:, :, None] - d[None, :, :]
    bad = np.argwhere(excess > t)
    order = np.argsort(-excess[tuple(bad.T)]) if len(bad) else []
    for i, j, k in bad[order][:max_reported] if len(bad) else []:
        out.append({"kind": "triangle", "points": [space.labels[i], space.labels[j], space.labels[k]],
                    "value": float(excess[i, j, k])})
    return ValidationReport(not out, out[:max_reported])


def squared_space(space: FiniteMetricSpace) -> np.ndarray:
    return space.dist * space.dist


def pair_label(a: str, b: str) -> str:
    return f"({a},{b})"


def product(space_y: FiniteMetricSpace, space_z: FiniteMetricSpace) -> FiniteMetricSpace:
    """l2 product; point ``(i, j)`` sits at index ``i * |Z| + j``."""
    ny, nz = space_y.n, space_z.n
    sq = space_y.sq[:, None, :, None] + space_z.sq[None, :, None, :]
    dist = np.sqrt(sq.reshape(ny * nz, ny * nz))
    labels = [pair_label(a, b) for a in space_y.labels for b in space_z.labels]
    return FiniteMetricSpace(labels, dist)


def iterated_product(spaces) -> FiniteMetricSpace:
    spaces = list(spaces)
    if not spaces:
        return point()
    out = spaces[0]
    for s in spaces[1:]:
        out = product(out, s)
    return out


# ---- small named spaces -------------------------------------------------

def point(label: str = "o") -> FiniteMetricSpace:
    return FiniteMetricSpace([label], np.zeros((1, 1)))


def k2(d: float, labels=("a", "b")) -> FiniteMetricSpace:
    return FiniteMetricSpace(list(labels), np.array([[0.0, d], [d, 0.0]]))


def three_point(d01: float, d12: float, d02: float, labels=("p", "q", "r")) -> FiniteMetricSpace:
    return FiniteMetricSpace(list(labels), np.array([[0.0, d01, d02], [d01, 0.0, d12], [d02, d12, 0.0]]))


def from_points(coords, labels=None) -> FiniteMetricSpace:
    """Euclidean distances between the rows of ``coords``."""
    x = np.atleast_2d(np.asarray(coords, dtype=float))
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    if labels is None:
        labels = [str(i) for i in range(len(x))]
    return FiniteMetricSpace(labels, dist)


def grid(*axes) -> FiniteMetricSpace:
    """Product of collinear point sets, e.g. ``grid([0, 1, 2], [0, 1])``."""
    spaces = [from_points(np.asarray(ax, dtype=float).reshape(-1, 1),
                          labels=[f"{v:g}" for v in ax]) for ax in axes]
    return iterated_product(spaces)
