"""Maximal-volume inscribed ellipsoid of a symmetric unit ball.

The ellipsoid ``{B u : |u| <= 1}`` is parametrized by ``X = B B^T``.  Every
supported norm can be written as ``||v||^2 = max_j |A_j^T v|^2`` for a family
of ``d x m`` blocks ``A_j`` (facet functionals, Cholesky factors, or tuples of
those for products), so containment in the ball reads ``A_j^T X A_j <= I``.
The problem ``max log det X`` under these linear matrix inequalities is solved
with a log-barrier and damped Newton steps; the barrier multipliers give a
dual feasible point and hence a certified optimality gap.

For norms whose block family is infinite (l_p with p not in {1, 2, inf}) a
finite family is grown by cutting planes: support blocks are added where the
current ellipsoid pokes out of the ball.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import normed_space as ns
from .normed_space import NormedSpace
from .polytope import unit_ball_volume
from .subspace import Subspace, principal_cosines

MAX_EXACT_BLOCKS = 20_000
# log-det gap 2e-6 bounds the relative volume gap by 1e-6
ACCEPT_GAP = 2e-6


class LoewnerError(ValueError):
    pass


class LoewnerConvergenceError(LoewnerError):
    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass
class Ellipsoid:
    """``{v : v^T M v <= 1}``; ``M`` also serves as the induced inner product."""

    shape: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.shape, dtype=float)
        m = (m + m.T) / 2
        if m.size and np.min(np.linalg.eigvalsh(m)) <= 0:
            raise LoewnerError("ellipsoid shape must be positive definite")
        self.shape = m

    @property
    def dim(self) -> int:
        return self.shape.shape[0]

    def volume(self) -> float:
        return unit_ball_volume(self.dim) / np.sqrt(np.linalg.det(self.shape))

    def generator(self) -> np.ndarray:
        """Symmetric ``B`` with ``E = B(unit ball)``."""
        w, v = np.linalg.eigh(self.shape)
        return (v / np.sqrt(w)) @ v.T

    def boundary_points(self, n: int, seed: int = 0) -> np.ndarray:
        u = np.random.default_rng(seed).standard_normal((n, self.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return u @ self.generator().T

    def inner(self, u, v) -> float:
        return float(np.asarray(u) @ self.shape @ np.asarray(v))

    def restrict(self, sub: Subspace) -> np.ndarray:
        """Shape of ``E cap sub`` in the coordinates of ``sub.basis``."""
        return sub.basis.T @ self.shape @ sub.basis

    def to_dict(self) -> dict:
        return {"shape": self.shape.tolist()}


@dataclass
class LoewnerResult:
    ellipsoid: Ellipsoid
    volume: float
    volume_gap: float
    containment_residual: float
    exact_constraints: bool
    converged: bool
    iterations: int
    log: list[str] = field(default_factory=list)

    @property
    def shape(self) -> np.ndarray:
        return self.ellipsoid.shape

    def to_dict(self) -> dict:
        return {"shape": self.shape.tolist(), "volume": self.volume, "volume_gap": self.volume_gap,
                "containment_residual": self.containment_residual,
                "exact_constraints": self.exact_constraints, "converged": self.converged,
                "iterations": self.iterations, "log": self.log}


# ---- constraint blocks ---------------------------------------------------------------

def _unique_up_to_sign(rows: np.ndarray) -> np.ndarray:
    keep = []
    seen = set()
    for r in rows:
        nz = np.flatnonzero(np.abs(r) > 1e-12)
        s = r if (len(nz) == 0 or r[nz[0]] > 0) else -r
        key = tuple(np.round(s, 10) + 0.0)
        if key not in seen:
            seen.add(key)
            keep.append(s)
    return np.array(keep)


def exact_blocks(space: NormedSpace) -> list[np.ndarray] | None:
    """Finite family with ``||v||^2 = max_j |A_j^T v|^2`` exactly, or None."""
    d = space.dim
    if space.form == "gram":
        return [np.linalg.cholesky(space.gram)]
    if space.form == "p_norm" and space.p == 2.0:
        return [np.eye(d)]
    if space.is_polyhedral:
        return [f[:, None] for f in _unique_up_to_sign(space.facet_functionals())]
    if space.form == "restricted":
        parent = exact_blocks(space.parent)
        return None if parent is None else [space.bases[0].T @ a for a in parent]
    if space.form == "product":
        cmap = space.coordinate_map()
        per = []
        count = 1
        for comp, sl in zip(space.components, space.block_slices()):
            if comp.dim == 0:
                continue
            blocks = exact_blocks(comp)
            if blocks is None:
                return None
            count *= len(blocks)
            if count > MAX_EXACT_BLOCKS:
                return None
            per.append([cmap[sl].T @ a for a in blocks])
        return [np.hstack(t) for t in itertools.product(*per)]
    return None


def support_block(space: NormedSpace, v: np.ndarray) -> np.ndarray:
    """A block ``A`` with ``|A^T v| = ||v||`` and ``|A^T w| <= ||w||`` for all ``w``."""
    d = space.dim
    v = np.asarray(v, dtype=float)
    if space.form == "gram":
        return np.linalg.cholesky(space.gram)
    if space.is_polyhedral:
        f = space.facet_functionals()
        return f[int(np.argmax(np.abs(f @ v)))][:, None]
    if space.form == "p_norm":
        if space.p == 2.0:
            return np.eye(d)
        nv = np.linalg.norm(v, ord=space.p)
        if nv == 0:
            return np.eye(d)[:, :1]
        p = space.p
        return (np.sign(v) * np.abs(v / nv) ** (p - 1))[:, None]
    if space.form == "restricted":
        b = space.bases[0]
        return b.T @ support_block(space.parent, b @ v)
    cmap = space.coordinate_map()
    c = cmap @ v
    cols = [cmap[sl].T @ support_block(comp, c[sl])
            for comp, sl in zip(space.components, space.block_slices()) if comp.dim]
    return np.hstack(cols)


def _quasi_directions(d: int, n: int, seed: int) -> np.ndarray:
    if d == 2:
        t = np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    u = np.random.default_rng(seed).standard_normal((n, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


# ---- the barrier solver ---------------------------------------------------------------

def _sym_basis(d: int) -> np.ndarray:
    out = []
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            e[i, j] = e[j, i] = 1.0 if i == j else np.sqrt(0.5)
            out.append(e)
    return np.array(out)


class _Blocks:
    """Blocks grouped by width for batched linear algebra."""

    def __init__(self, blocks):
        groups: dict[int, list[np.ndarray]] = {}
        for a in blocks:
            groups.setdefault(a.shape[1], []).append(a)
        self.groups = [np.array(g) for g in groups.values()]
        self.total_width = sum(g.shape[0] * g.shape[2] for g in self.groups)

    def slack(self, x):
        return [np.eye(g.shape[2]) - np.einsum("jdm,de,jen->jmn", g, x, g) for g in self.groups]

    def feasible(self, x) -> bool:
        if np.min(np.linalg.eigvalsh(x)) <= 0:
            return False
        for s in self.slack(x):
            if np.min(np.linalg.eigvalsh(s)) <= 0:
                return False
        return True

    def max_violation(self, x) -> float:
        return max(float(np.max(np.linalg.eigvalsh(np.eye(g.shape[2]) - s)))
                   for g, s in zip(self.groups, self.slack(x)))


def _barrier_value(x, blocks: _Blocks, t: float) -> float:
    sign, ld = np.linalg.slogdet(x)
    if sign <= 0:
        return -np.inf
    val = t * ld
    for s in blocks.slack(x):
        sg, lds = np.linalg.slogdet(s)
        if np.any(sg <= 0):
            return -np.inf
        val += float(np.sum(lds))
    return val


def _newton_data(x, blocks: _Blocks, t: float, eb: np.ndarray):
    xi = np.linalg.inv(x)
    grad_m = t * xi
    t4 = t * np.einsum("ab,ce->bcea", xi, xi)
    ks = []
    for g, s in zip(blocks.groups, blocks.slack(x)):
        k = np.einsum("jdm,jmn,jen->jde", g, np.linalg.inv(s), g)
        ks.append(k)
        grad_m = grad_m - k.sum(axis=0)
        t4 = t4 + np.einsum("jab,jce->bcea", k, k)
    grad = np.einsum("kab,ab->k", eb, grad_m)
    hess = -np.einsum("kbc,bcea,lea->kl", eb, t4, eb)
    return grad, hess, ks


def _solve(blocks: _Blocks, d: int, x0: np.ndarray | None, gap_target: float, max_newton: int,
           log: list[str]) -> tuple[np.ndarray, float, int, bool]:
    eb = _sym_basis(d)
    if x0 is None or not blocks.feasible(x0):
        lam = max(float(np.max(np.linalg.eigvalsh(np.einsum("jdm,jdn->jmn", g, g)))) for g in blocks.groups)
        x = np.eye(d) * (0.81 / lam)
    else:
        x = x0 * 0.999
    t = 1.0
    iters = 0
    best = (np.inf, x)
    while True:
        stalled = False
        for k in range(max_newton + 1):
            grad, hess, _ = _newton_data(x, blocks, t, eb)
            step = -np.linalg.solve(hess, grad)
            dec = float(grad @ step)
            if dec < 1e-11:
                break
            if k == max_newton:
                stalled = True
                break
            dx = np.einsum("k,kab->ab", step, eb)
            accepted = None
            # quadratic region of a self-concordant barrier: the full step is safe and
            # the barrier value is too large to resolve its improvement in floating point
            if dec < 0.1 and blocks.feasible(x + dx):
                x = x + dx
                x = (x + x.T) / 2
                iters += 1
                continue
            f0 = _barrier_value(x, blocks, t)
            alpha = 1.0
            while alpha > 1e-12:
                xn = x + alpha * dx
                if blocks.feasible(xn) and _barrier_value(xn, blocks, t) >= f0 + 0.1 * alpha * dec:
                    accepted = xn
                    break
                alpha *= 0.6
            if accepted is None:
                stalled = True
                break
            x = (accepted + accepted.T) / 2
            iters += 1
        gap = _duality_gap(x, blocks, t)
        if gap < best[0]:
            best = (gap, x.copy())
        if gap <= gap_target:
            log.append(f"t={t:.3g}: duality gap {gap:.3e} after {iters} Newton steps")
            return x, gap, iters, True
        if stalled or t > 1e16:
            # floating-point floor: keep the best certified iterate
            gap, x = best
            ok = gap <= ACCEPT_GAP
            log.append(f"centering stalled at t={t:.3g}; best duality gap {gap:.3e}")
            return x, gap, iters, ok
        t *= 20.0


def _duality_gap(x, blocks: _Blocks, t: float) -> float:
    """Dual value of the multipliers ``U_j = S_j^{-1} / t`` minus the primal value.

    Written as ``sum(mu - 1 - log mu) + sum tr(U_j S_j)`` over the eigenvalues
    ``mu`` of ``X W``; this avoids cancelling two large log-determinants.
    """
    d = x.shape[0]
    w = np.zeros((d, d))
    slack_term = 0.0
    for g, s in zip(blocks.groups, blocks.slack(x)):
        u = np.linalg.inv(s) / t
        w += np.einsum("jdm,jmn,jen->de", g, u, g)
        slack_term += float(np.einsum("jmn,jnm->", u, s))
    l = np.linalg.cholesky(x)
    mu = np.linalg.eigvalsh(l.T @ w @ l)
    if np.min(mu) <= 0:
        return np.inf
    return float(np.sum((mu - 1.0) - np.log(mu)) + slack_term)


def _containment(space: NormedSpace, x: np.ndarray, n: int, seed: int) -> tuple[float, np.ndarray]:
    e = Ellipsoid(np.linalg.inv(x))
    pts = e.boundary_points(n, seed)
    vals = ns.norm(space, pts)
    return float(np.max(vals) - 1.0), pts[np.argsort(-vals)]


def max_inscribed_ellipsoid(space: NormedSpace, gap_target: float = 1e-9, max_newton: int = 80,
                            seed: int = 0, method: str = "auto", max_rounds: int = 40) -> LoewnerResult:
    """Löwner ellipsoid of the unit ball of ``space``.

    ``method="auto"`` uses closed forms where symmetry decides the answer
    (gram balls, l_p balls); ``"generic"`` always runs the barrier solver.
    """
    d = space.dim
    log: list[str] = []
    if d == 0:
        return LoewnerResult(Ellipsoid(np.zeros((0, 0))), 1.0, 0.0, 0.0, True, True, 0, ["zero space"])
    if method == "auto" and space.form == "gram":
        e = Ellipsoid(space.gram.copy())
        return LoewnerResult(e, e.volume(), 0.0, 0.0, True, True, 0, ["gram ball is its own ellipsoid"])
    if method == "auto" and space.form == "p_norm":
        # the ball is invariant under signed permutations, which act irreducibly
        r = 1.0 if space.p >= 2 else d ** (0.5 - 1.0 / space.p)
        e = Ellipsoid(np.eye(d) / r**2)
        return LoewnerResult(e, e.volume(), 0.0, 0.0, True, True, 0,
                             [f"symmetric l_p ball: round ball of radius {r:.12g}"])
    if space.is_polyhedral and len(space.facet_functionals()) < 2 * d:
        raise LoewnerError("degenerate ball")
    blocks = exact_blocks(space)
    exact = blocks is not None
    if exact:
        log.append(f"{len(blocks)} exact constraint blocks")
        x, gap, iters, ok = _solve(_Blocks(blocks), d, None, gap_target, max_newton, log)
        resid, _ = _containment(space, x, 1000, seed)
    else:
        dirs = _quasi_directions(d, 64 * d, seed)
        blocks = [support_block(space, v) for v in dirs]
        log.append(f"{len(blocks)} sampled support blocks")
        x, iters, ok = None, 0, False
        for rnd in range(max_rounds):
            x_new, gap, it, ok = _solve(_Blocks(blocks), d, x, gap_target, max_newton, log)
            iters += it
            resid, worst = _containment(space, x_new, 4000 * d, seed + rnd + 1)
            change = np.inf if x is None else float(np.max(np.abs(x_new - x)))
            x = x_new
            if resid <= 1e-12 or change < 1e-7:
                log.append(f"round {rnd}: containment residual {resid:.2e}, change {change:.2e}")
                break
            blocks += [support_block(space, v) for v in worst[:64]]
        else:
            ok = False
    e = Ellipsoid(np.linalg.inv(x))
    result = LoewnerResult(e, e.volume(), float(-np.expm1(-gap / 2)), resid, exact, ok, iters, log)
    if not ok:
        raise LoewnerConvergenceError("Löwner solver did not reach the requested gap", result)
    return result


def euclideanization(space: NormedSpace, **kwargs) -> Ellipsoid:
    """The inner product ``<u, v> = u^T M v`` of the Löwner ellipsoid."""
    return max_inscribed_ellipsoid(space, **kwargs).ellipsoid


@dataclass
class EllipsReport:
    passed: bool
    refused: bool
    reason: str
    max_cosine: float
    restriction_error: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "refused": self.refused, "reason": self.reason,
                "max_cosine": self.max_cosine, "restriction_error": self.restriction_error,
                "details": self.details}


def check_lemma_ellips(space: NormedSpace, s1: Subspace, s2: Subspace, tol_angle: float = 1e-6,
                       tol_shape: float = 1e-5, method: str = "generic", seed: int = 0) -> EllipsReport:
    """Factors of a product norm are orthogonal in the Löwner inner product,
    and the ellipsoid cut by each factor is that factor's own Löwner ellipsoid."""
    chk = ns.is_product_decomposition(space, s1, s2, seed=seed)
    if not chk.is_product:
        return EllipsReport(False, True, f"not a product decomposition (residual {chk.worst_residual:.3e})",
                            float("nan"), float("nan"))
    e = max_inscribed_ellipsoid(space, method=method, seed=seed).ellipsoid
    cos = principal_cosines(s1, s2, e.shape)
    max_cos = float(np.max(cos)) if cos.size else 0.0
    errs = []
    for s in (s1, s2):
        own = max_inscribed_ellipsoid(ns.restricted(space, s), method=method, seed=seed).shape
        cut = e.restrict(s)
        errs.append(float(np.max(np.abs(cut - own)) / max(1.0, float(np.max(np.abs(own))))))
    err = max(errs)
    ok = max_cos <= tol_angle and err <= tol_shape
    return EllipsReport(ok, False, "factors orthogonal, restrictions agree" if ok else "lemma check failed",
                        max_cos, err, {"shape": e.shape.tolist(), "restriction_errors": errs})
