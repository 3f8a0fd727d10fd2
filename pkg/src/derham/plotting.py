"""Figures written next to CLI reports (headless backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import normed_space as ns  # noqa: E402


def _save(fig, path) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return str(path)


def distance_heatmap(space, path, order=None) -> str:
    """Distance matrix, optionally reordered (e.g. by factor coordinates)."""
    idx = np.arange(space.n) if order is None else np.asarray(order)
    d = space.dist[np.ix_(idx, idx)]
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(d, cmap="viridis")
    labels = [space.labels[i] for i in idx]
    if space.n <= 24:
        ax.set_xticks(range(space.n), labels, rotation=90, fontsize=7)
        ax.set_yticks(range(space.n), labels, fontsize=7)
    fig.colorbar(im, ax=ax, label="distance")
    ax.set_title(f"{space.n} points")
    return _save(fig, path)


def unit_ball_with_ellipsoid(space, shape, path, samples: int = 720) -> str:
    """2-d unit ball boundary and the inscribed ellipse ``v^T M v = 1``."""
    if space.dim != 2:
        raise ValueError("ball plot needs a 2-dimensional space")
    t = np.linspace(0, 2 * np.pi, samples)
    dirs = np.stack([np.cos(t), np.sin(t)], axis=1)
    ball = dirs / ns.norm(space, dirs)[:, None]
    ell = dirs / np.sqrt(np.einsum("ni,ij,nj->n", dirs, shape, dirs))[:, None]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(ball[:, 0], ball[:, 1], lw=1.6, label="unit ball")
    ax.plot(ell[:, 0], ell[:, 1], lw=1.2, ls="--", label="inscribed ellipse")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def defect_samples(space, path, samples: int = 4000, seed: int = 0, m_value: float | None = None) -> str:
    """Histogram of the parallelogram ratio on random pairs."""
    from .rigidity import defect_ratio

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, space.dim))
    y = rng.standard_normal((samples, space.dim))
    r = defect_ratio(space, x, y)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(r, bins=60, color="0.4")
    ax.axvline(np.sqrt(2), color="k", lw=0.8, ls=":", label="sqrt 2")
    if m_value is not None:
        ax.axvline(m_value, color="C3", lw=1.2, label="reported maximum")
    ax.set_xlabel("ratio")
    ax.legend(fontsize=8)
    return _save(fig, path)
