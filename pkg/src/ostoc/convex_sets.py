"""Target sets S given as axis-aligned boxes inside [0, 1]^d.

Packing caps, covering floors and two-sided feasibility boxes are all boxes,
so support function, distance and nearest point are closed form. A new set
type only has to provide ``support``, ``support_argmax``, ``distance`` and
``s_param``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .vectorspace import NormKind, as_vec, dual_ball_grid_max, norm


@dataclass(frozen=True, eq=False)
class BoxSet:
    """S = {y : lower <= y <= upper} with the norm used for d(., S)."""

    lower: np.ndarray
    upper: np.ndarray
    distance_norm: NormKind = NormKind.MAX_ABS
    label: str = field(default="box")

    def __post_init__(self):
        lo = as_vec(self.lower, "lower")
        hi = as_vec(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same dimension")
        if np.any(lo < 0) or np.any(hi > 1):
            raise ValueError("box must lie inside [0, 1]^d")
        if np.any(lo > hi):
            raise ValueError("empty box: lower exceeds upper in some coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "distance_norm", NormKind.parse(self.distance_norm))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def s_param(self) -> float:
        """Largest value any coordinate of a point in S can take."""
        return float(np.max(self.upper))

    def contains(self, v, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    def nearest(self, v) -> np.ndarray:
        return np.clip(np.asarray(v, dtype=float), self.lower, self.upper)

    def to_dict(self) -> dict:
        return {"type": "box", "label": self.label,
                "lower": [float(x) for x in self.lower],
                "upper": [float(x) for x in self.upper],
                "norm": self.distance_norm.value}

    @classmethod
    def from_dict(cls, data: dict) -> "BoxSet":
        if data.get("type", "box") != "box":
            raise ValueError(f"unsupported set type {data.get('type')!r}")
        return cls(np.asarray(data["lower"], float), np.asarray(data["upper"], float),
                   NormKind.parse(data.get("norm", "maxabs")), data.get("label", "box"))


def budget_cap(cap, distance_norm=NormKind.MAX_ABS) -> BoxSet:
    """Packing constraint set {0 <= y <= cap}."""
    cap = as_vec(cap, "cap")
    return BoxSet(np.zeros_like(cap), cap, distance_norm, "budget_cap")


def cover_floor(floor, distance_norm=NormKind.MAX_ABS) -> BoxSet:
    """Covering constraint set {floor <= y <= 1}."""
    floor = as_vec(floor, "floor")
    if np.any(floor > 1):
        raise ValueError("covering floor above 1 is infeasible")
    return BoxSet(floor, np.ones_like(floor), distance_norm, "cover_floor")


def support(S: BoxSet, theta) -> float:
    """h_S(theta) = max_{y in S} theta . y."""
    theta = np.asarray(theta, dtype=float)
    return float(np.sum(np.where(theta > 0, theta * S.upper, theta * S.lower)))


def support_many(S: BoxSet, thetas: np.ndarray) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    return np.sum(np.where(thetas > 0, thetas * S.upper, thetas * S.lower), axis=-1)


def support_argmax(S: BoxSet, theta, hint=None) -> np.ndarray:
    """A maximizer of theta . y over S.

    Coordinates with theta_j == 0 are tied over [lower_j, upper_j]; there the
    hint (clamped into the box) is used, or the lower bound when no hint is
    given. Passing the played vector as hint makes ``v - y`` vanish in
    coordinates where v already satisfies the constraint.
    """
    theta = np.asarray(theta, dtype=float)
    tie = S.lower if hint is None else np.clip(hint, S.lower, S.upper)
    return np.where(theta > 0, S.upper, np.where(theta < 0, S.lower, tie))


def distance(v, S: BoxSet) -> float:
    """d(v, S) in the set's norm. The coordinatewise clamp is the nearest point for both norms."""
    v = np.asarray(v, dtype=float)
    return norm(v - np.clip(v, S.lower, S.upper), S.distance_norm)


def distance_many(V: np.ndarray, S: BoxSet) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    gap = V - np.clip(V, S.lower, S.upper)
    if S.distance_norm is NormKind.EUCLIDEAN:
        return np.sqrt(np.sum(gap * gap, axis=-1))
    return np.max(np.abs(gap), axis=-1)


def squared_distance(v, S: BoxSet) -> float:
    """Euclidean squared distance to S; the smooth constraint penalty."""
    v = np.asarray(v, dtype=float)
    gap = v - np.clip(v, S.lower, S.upper)
    return float(np.dot(gap, gap))


def fenchel_distance_oracle(v, S: BoxSet, grid_resolution: int = 21) -> float:
    """Brute-force max over ||theta||_* <= 1 of theta . v - h_S(theta).

    Test oracle for ``distance``; it only evaluates the dual objective on
    grid points and never uses the clamp formula.
    """
    if grid_resolution < 10:
        raise ValueError("grid_resolution must be at least 10 per axis")
    v = np.asarray(v, dtype=float)

    def dual_objective(thetas):
        return thetas @ v - support_many(S, thetas)

    _, val = dual_ball_grid_max(dual_objective, v.size, S.distance_norm, 1.0,
                                resolution=grid_resolution)
    return val
