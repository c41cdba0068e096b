"""Norms, dual norms and dual-ball projections.

Only two primal norms are supported, each paired with its dual:

* ``EUCLIDEAN``: ||x||_2, self-dual.
* ``MAX_ABS``:   ||x||_inf, whose dual is the L1 norm.

Keeping to these two pairs makes every dual-ball projection closed form.
"""
from __future__ import annotations

import enum
from typing import Callable

import numpy as np


class NormKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MAX_ABS = "maxabs"

    @classmethod
    def parse(cls, value: "NormKind | str") -> "NormKind":
        if isinstance(value, NormKind):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"euclidean": cls.EUCLIDEAN, "l2": cls.EUCLIDEAN, "2": cls.EUCLIDEAN,
                   "maxabs": cls.MAX_ABS, "linf": cls.MAX_ABS, "inf": cls.MAX_ABS}
        if key not in aliases:
            raise ValueError(f"unknown norm {value!r}")
        return aliases[key]


def as_vec(values, name: str = "vector") -> np.ndarray:
    """Convert to a 1-D float array, rejecting NaN/inf and empty input."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def norm(v, kind: NormKind | str) -> float:
    v = np.asarray(v, dtype=float)
    if NormKind.parse(kind) is NormKind.EUCLIDEAN:
        return float(np.sqrt(np.dot(v, v)))
    return float(np.max(np.abs(v)))


def dual_norm(v, kind: NormKind | str) -> float:
    """||v||_* : Euclidean for EUCLIDEAN, sum of absolute values for MAX_ABS."""
    v = np.asarray(v, dtype=float)
    if NormKind.parse(kind) is NormKind.EUCLIDEAN:
        return float(np.sqrt(np.dot(v, v)))
    return float(np.sum(np.abs(v)))


def ones_norm(d: int, kind: NormKind | str) -> float:
    """||1_d|| in the primal norm."""
    return float(np.sqrt(d)) if NormKind.parse(kind) is NormKind.EUCLIDEAN else 1.0


def _slack(radius: float) -> float:
    # rounding room so a projected point counts as inside; makes projection idempotent
    return radius + 1e-14 * max(1.0, radius)


def project_l1_ball(theta, radius: float) -> np.ndarray:
    """Euclidean projection onto {u : ||u||_1 <= radius} by sort-based soft thresholding."""
    theta = np.asarray(theta, dtype=float)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    a = np.abs(theta)
    if a.sum() <= _slack(radius):
        return theta.copy()
    if radius == 0:
        return np.zeros_like(theta)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    hits = np.nonzero(u * idx > css - radius)[0]
    rho = hits[-1] if hits.size else 0  # index 0 always qualifies in exact arithmetic
    tau = (css[rho] - radius) / (rho + 1.0)
    return np.sign(theta) * np.maximum(a - tau, 0.0)


def project_dual_ball(theta, kind: NormKind | str, radius: float) -> np.ndarray:
    """Nearest point (in Euclidean distance) of the dual-norm ball of ``radius``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    theta = np.asarray(theta, dtype=float)
    if NormKind.parse(kind) is NormKind.MAX_ABS:
        return project_l1_ball(theta, radius)
    n2 = float(np.sqrt(np.dot(theta, theta)))
    if n2 <= _slack(radius):
        return theta.copy()
    if radius == 0:
        return np.zeros_like(theta)
    return theta * (radius / n2)


def project_dual_ball_rows(P, kind: NormKind | str, radius: float) -> np.ndarray:
    """Row-wise ``project_dual_ball`` for an (n, d) array."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if radius == 0:
        return np.zeros_like(P)
    if NormKind.parse(kind) is NormKind.EUCLIDEAN:
        n2 = np.sqrt(np.sum(P * P, axis=1, keepdims=True))
        scale = np.where(n2 > _slack(radius), radius / np.maximum(n2, 1e-300), 1.0)
        return P * scale
    A = np.abs(P)
    inside = A.sum(axis=1) <= _slack(radius)
    U = -np.sort(-A, axis=1)
    css = np.cumsum(U, axis=1)
    idx = np.arange(1, P.shape[1] + 1)
    cond = U * idx > css - radius
    rho = P.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = (css[np.arange(P.shape[0]), rho] - radius) / (rho + 1.0)
    out = np.sign(P) * np.maximum(A - tau[:, None], 0.0)
    out[inside] = P[inside]
    return out


def dual_ball_grid_max(fun: Callable[[np.ndarray], np.ndarray], d: int,
                       kind: NormKind | str, radius: float = 1.0,
                       resolution: int = 21, refine_rounds: int = 30):
    """Maximize ``fun`` over the dual-norm ball by grid search with zoom refinement.

    ``fun`` takes an (n, d) array of points and returns n values. Grid points
    falling outside the ball are projected onto it. Each refinement round
    re-grids a shrinking cube around the incumbent. Intended as a brute-force
    test oracle, so it never uses structure of ``fun``.

    Returns ``(best_point, best_value)``.
    """
    if resolution < 3:
        raise ValueError("resolution must be at least 3")
    kind = NormKind.parse(kind)

    def project_rows(P):
        return project_dual_ball_rows(P, kind, radius)

    axis = np.linspace(-radius, radius, resolution)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    pts = project_rows(mesh)
    pts = np.vstack([pts, np.zeros((1, d))])
    vals = np.asarray(fun(pts), dtype=float)
    i = int(np.argmax(vals))
    best, best_val = pts[i], float(vals[i])

    half = radius * 2.0 / (resolution - 1)
    local_res = 5 if d >= 3 else 9
    for _ in range(refine_rounds):
        offs = np.linspace(-half, half, local_res)
        local = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), axis=-1).reshape(-1, d)
        cand = project_rows(best + local)
        cvals = np.asarray(fun(cand), dtype=float)
        j = int(np.argmax(cvals))
        if cvals[j] > best_val:
            best, best_val = cand[j], float(cvals[j])
        half *= 0.5
    return best, best_val
