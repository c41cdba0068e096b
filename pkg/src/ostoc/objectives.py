"""Concave objectives f on [0, 1]^d and the conjugate of -f.

Throughout, the conjugate is taken of the convex function -f over the unit box::

    (-f)*(phi) = max_{x in [0,1]^d}  phi . x + f(x)

and ``conjugate_argmax`` returns the coordinatewise-smallest maximizer. All
built-in objectives are separable across coordinates, so both quantities are
computed one coordinate at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .vectorspace import NormKind, as_vec

_DOMAIN_TOL = 1e-9
_TIE_TOL = 1e-12
_GOLDEN_TOL = 1e-9
_GOLDEN_MAX_ITER = 200


class UnsupportedVariant(ValueError):
    """Raised when an operation needs smoothness the objective does not have."""


def _check_domain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < -_DOMAIN_TOL) or np.any(x > 1 + _DOMAIN_TOL):
        raise ValueError("objective evaluated outside [0, 1]^d")
    return x


def golden_section_max(fun: Callable[[float], float], lo: float = 0.0, hi: float = 1.0,
                       tol: float = _GOLDEN_TOL) -> float:
    """Maximizer of a unimodal 1-D function on [lo, hi]; endpoints are also checked."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(_GOLDEN_MAX_ITER):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    best = 0.5 * (a + b)
    cands = [lo, best, hi]
    vals = [fun(t) for t in cands]
    top = max(vals)
    return min(t for t, v in zip(cands, vals) if v >= top - _TIE_TOL)


# ---------------------------------------------------------------------------
# one-dimensional concave pieces


class Piece:
    """A concave function of one coordinate on [0, 1]."""

    smooth = False
    breakpoints: tuple[float, ...] | None = None

    def value(self, x):
        raise NotImplementedError

    def derivative_bound(self) -> float:
        raise NotImplementedError

    def beta(self) -> float | None:
        return None

    def derivative(self, x):
        raise UnsupportedVariant(f"{type(self).__name__} is not differentiable")

    def conj_argmax(self, phi: float) -> float:
        if self.breakpoints is not None:
            pts = np.asarray(self.breakpoints)
            vals = phi * pts + self.value(pts)
            return float(pts[np.nonzero(vals >= vals.max() - _TIE_TOL)[0][0]])
        return golden_section_max(lambda t: phi * t + float(self.value(t)))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearPiece(Piece):
    slope: float

    smooth = True
    breakpoints = (0.0, 1.0)

    def value(self, x):
        return self.slope * np.asarray(x, dtype=float)

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.slope)

    def derivative_bound(self):
        return abs(self.slope)

    def beta(self):
        return 0.0

    def to_dict(self):
        return {"kind": "linear", "slope": self.slope}


@dataclass(frozen=True)
class CappedPiece(Piece):
    """min(slope * x, cap): linear up to the cap, flat afterwards."""

    slope: float
    cap: float

    def __post_init__(self):
        if self.slope <= 0 or self.cap <= 0:
            raise ValueError("capped piece needs positive slope and cap")

    @property
    def breakpoints(self):
        kink = self.cap / self.slope
        return (0.0, kink, 1.0) if 0.0 < kink < 1.0 else (0.0, 1.0)

    def value(self, x):
        return np.minimum(self.slope * np.asarray(x, dtype=float), self.cap)

    def derivative_bound(self):
        return self.slope

    def to_dict(self):
        return {"kind": "capped", "slope": self.slope, "cap": self.cap}


@dataclass(frozen=True)
class LogPiece(Piece):
    """scale * log(1 + rate * x)."""

    scale: float
    rate: float

    smooth = True

    def __post_init__(self):
        if self.scale <= 0 or self.rate <= 0:
            raise ValueError("log piece needs positive scale and rate")

    def value(self, x):
        return self.scale * np.log1p(self.rate * np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.scale * self.rate / (1.0 + self.rate * np.asarray(x, dtype=float))

    def derivative_bound(self):
        return self.scale * self.rate

    def beta(self):
        return self.scale * self.rate ** 2

    def conj_argmax(self, phi):
        s, r = self.scale, self.rate
        if phi + s * r <= 0:
            return 0.0
        if phi + s * r / (1.0 + r) >= 0:
            return 1.0
        return float(min(1.0, max(0.0, -s / phi - 1.0 / r)))

    def to_dict(self):
        return {"kind": "log", "scale": self.scale, "rate": self.rate}


@dataclass(frozen=True, eq=False)
class CallablePiece(Piece):
    """A user-supplied concave piece; conjugates fall back to golden-section search."""

    fn: Callable
    lipschitz: float
    deriv: Callable | None = None
    smoothness: float | None = None

    @property
    def smooth(self):
        return self.deriv is not None

    def value(self, x):
        return np.vectorize(self.fn, otypes=[float])(np.asarray(x, dtype=float))

    def derivative(self, x):
        if self.deriv is None:
            raise UnsupportedVariant("callable piece has no derivative")
        return np.vectorize(self.deriv, otypes=[float])(np.asarray(x, dtype=float))

    def derivative_bound(self):
        return self.lipschitz

    def beta(self):
        return self.smoothness

    def to_dict(self):
        raise ValueError("callable pieces cannot be serialized")


_PIECES = {"linear": LinearPiece, "capped": CappedPiece, "log": LogPiece}


def piece_from_dict(data: dict) -> Piece:
    data = dict(data)
    kind = data.pop("kind")
    return _PIECES[kind](**data)


# ---------------------------------------------------------------------------
# objectives


class Objective:
    """Base class. Subclasses define per-coordinate conjugate maximizers."""

    kind = "abstract"
    uses_rewards = False

    def __init__(self, dim: int, lipschitz_L: float | None = None):
        if dim < 1:
            raise ValueError("dimension must be at least 1")
        self.dim = int(dim)
        self._lipschitz_override = lipschitz_L

    # -- required by subclasses
    def value(self, x):
        raise NotImplementedError

    def conjugate_argmax(self, phi) -> np.ndarray:
        raise NotImplementedError

    def derivative_bounds(self) -> np.ndarray:
        raise NotImplementedError

    # -- shared
    def conjugate(self, phi) -> float:
        phi = np.asarray(phi, dtype=float)
        x = self.conjugate_argmax(phi)
        return float(phi @ x + self.value(x))

    def conjugate_coords(self, phi) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate conjugate values and maximizers (valid because f is separable)."""
        phi = np.asarray(phi, dtype=float)
        x = self.conjugate_argmax(phi)
        return phi * x + self.coord_values(x), x

    def coord_values(self, x) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self, kind: NormKind | str = NormKind.EUCLIDEAN) -> float:
        """Bound on the dual norm of every supergradient of f on the unit box."""
        if self._lipschitz_override is not None:
            return float(self._lipschitz_override)
        b = self.derivative_bounds()
        if NormKind.parse(kind) is NormKind.EUCLIDEAN:
            return float(np.sqrt(np.dot(b, b)))
        return float(np.sum(b))

    @property
    def smoothness_beta(self) -> float | None:
        return None

    def gradient(self, x) -> np.ndarray:
        raise UnsupportedVariant(f"{self.kind} objective is not differentiable")

    def gradient_range_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise UnsupportedVariant(f"{self.kind} objective has no gradient range")

    def to_dict(self) -> dict:
        raise NotImplementedError


class ZeroObjective(Objective):
    """f = 0: the pure feasibility problem."""

    kind = "zero"

    def __init__(self, dim: int):
        super().__init__(dim)

    def value(self, x):
        x = _check_domain(x)
        return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0

    def coord_values(self, x):
        return np.zeros(self.dim)

    def conjugate_argmax(self, phi):
        return (np.asarray(phi, dtype=float) > 0).astype(float)

    def derivative_bounds(self):
        return np.zeros(self.dim)

    def to_dict(self):
        return {"type": "zero", "dim": self.dim}


class LinearReward(ZeroObjective):
    """The objective is the average of per-option rewards; f itself is identically zero."""

    kind = "linear_reward"
    uses_rewards = True

    def to_dict(self):
        return {"type": "linear_reward", "dim": self.dim}


class SeparableConcave(Objective):
    """f(x) = sum_j piece_j(x_j)."""

    kind = "separable"

    def __init__(self, pieces, lipschitz_L: float | None = None):
        pieces = tuple(pieces)
        super().__init__(len(pieces), lipschitz_L)
        self.pieces = pieces

    def coord_values(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([float(p.value(x[j])) for j, p in enumerate(self.pieces)])

    def value(self, x):
        x = _check_domain(x)
        total = 0.0
        for j, p in enumerate(self.pieces):
            total = total + p.value(x[..., j])
        return float(total) if np.ndim(total) == 0 else total

    def conjugate_argmax(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.array([p.conj_argmax(float(phi[j])) for j, p in enumerate(self.pieces)])

    def derivative_bounds(self):
        return np.array([p.derivative_bound() for p in self.pieces], dtype=float)

    @property
    def is_smooth(self) -> bool:
        return all(p.smooth for p in self.pieces)

    @property
    def smoothness_beta(self):
        if not self.is_smooth:
            return None
        return max(float(p.beta() or 0.0) for p in self.pieces)

    def gradient(self, x):
        if not self.is_smooth:
            raise UnsupportedVariant("separable objective has non-smooth pieces")
        x = _check_domain(x)
        return np.stack([p.derivative(x[..., j]) for j, p in enumerate(self.pieces)], axis=-1)

    def gradient_range_box(self):
        if not self.is_smooth:
            raise UnsupportedVariant("separable objective has non-smooth pieces")
        # concave pieces have non-increasing derivatives
        d0 = np.array([float(p.derivative(0.0)) for p in self.pieces])
        d1 = np.array([float(p.derivative(1.0)) for p in self.pieces])
        return np.minimum(d0, d1), np.maximum(d0, d1)

    def to_dict(self):
        return {"type": "separable", "pieces": [p.to_dict() for p in self.pieces]}


class QuadraticConcave(Objective):
    """f(x) = a . x - (beta / 2) * ||x - x0||_2^2."""

    kind = "quadratic"

    def __init__(self, a, x0, beta: float, lipschitz_L: float | None = None):
        a = as_vec(a, "a")
        x0 = as_vec(x0, "x0")
        if a.shape != x0.shape:
            raise ValueError("a and x0 must have the same dimension")
        if not beta > 0:
            raise ValueError("beta must be positive")
        super().__init__(a.size, lipschitz_L)
        self.a, self.x0, self.beta = a, x0, float(beta)

    def coord_values(self, x):
        x = np.asarray(x, dtype=float)
        return self.a * x - 0.5 * self.beta * (x - self.x0) ** 2

    def value(self, x):
        x = _check_domain(x)
        r = x @ self.a - 0.5 * self.beta * np.sum((x - self.x0) ** 2, axis=-1)
        return float(r) if np.ndim(r) == 0 else r

    def conjugate_argmax(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.clip(self.x0 + (phi + self.a) / self.beta, 0.0, 1.0)

    def gradient(self, x):
        x = _check_domain(x)
        return self.a - self.beta * (x - self.x0)

    def gradient_range_box(self):
        return self.a - self.beta * (1.0 - self.x0), self.a + self.beta * self.x0

    def derivative_bounds(self):
        lo, hi = self.gradient_range_box()
        return np.maximum(np.abs(lo), np.abs(hi))

    @property
    def smoothness_beta(self):
        return self.beta

    def to_dict(self):
        return {"type": "quadratic", "a": [float(v) for v in self.a],
                "x0": [float(v) for v in self.x0], "beta": self.beta}


def objective_from_dict(data: dict) -> Objective:
    kind = data["type"]
    if kind == "zero":
        return ZeroObjective(int(data["dim"]))
    if kind == "linear_reward":
        return LinearReward(int(data["dim"]))
    if kind == "separable":
        return SeparableConcave([piece_from_dict(p) for p in data["pieces"]])
    if kind == "quadratic":
        return QuadraticConcave(data["a"], data["x0"], data["beta"])
    raise ValueError(f"unknown objective type {kind!r}")


# ---------------------------------------------------------------------------
# functional aliases


def eval_objective(f: Objective, x):
    return f.value(x)


def conjugate_neg_f(f: Objective, phi) -> float:
    return f.conjugate(phi)


def conjugate_neg_f_argmax(f: Objective, phi) -> np.ndarray:
    return f.conjugate_argmax(phi)


def gradient_range_box(f: Objective) -> tuple[np.ndarray, np.ndarray]:
    return f.gradient_range_box()


# ---------------------------------------------------------------------------
# smooth constraint penalty


class SquaredDistancePenalty:
    """h(x) = sum_j (x_j - upper_j)_+^2 + (lower_j - x_j)_+^2, the squared Euclidean
    distance to a box. It is 2-strongly smooth; its conjugate over the unit box
    is taken as h*(theta) = max_{y in [0,1]^d} theta . y - h(y).
    """

    beta = 2.0

    def __init__(self, lower, upper):
        self.lower = as_vec(lower, "lower")
        self.upper = as_vec(upper, "upper")
        self.dim = self.lower.size

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        gap = np.maximum(x - self.upper, 0.0) + np.maximum(self.lower - x, 0.0)
        return float(np.sum(gap * gap))

    def conjugate_argmax(self, theta, hint=None) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        up = np.minimum(self.upper + theta / 2.0, 1.0)
        down = np.maximum(self.lower + theta / 2.0, 0.0)
        tie = self.lower if hint is None else np.clip(hint, self.lower, self.upper)
        return np.where(theta > 0, up, np.where(theta < 0, down, tie))

    def conjugate(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        y = self.conjugate_argmax(theta)
        return float(theta @ y - self.value(y))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 2.0 * (np.maximum(x - self.upper, 0.0) - np.maximum(self.lower - x, 0.0))

    def gradient_range_box(self) -> tuple[np.ndarray, np.ndarray]:
        return -2.0 * self.lower, 2.0 * (1.0 - self.upper)
