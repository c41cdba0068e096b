"""Online learners producing the dual iterates.

Every learner exposes ``current()`` and ``observe_linear(z)`` where ``z`` is a
supergradient of the round's concave payoff at the current iterate, so the
learners only ever see linearized payoffs.

* ``OgdBall``: projected gradient ascent on a dual-norm ball, anytime step
  D / (G sqrt(t)).
* ``MwSimplex``: multiplicative weights, w_j <- w_j (1 + eps)^(z_j / M), with an
  optional origin expert of constant weight.
* ``SignedMw``: multiplicative weights over the 2d signed unit vectors plus the
  origin, covering the L1 ball.
* ``StronglyConcaveOgd``: box-projected gradient ascent with step 1 / (H t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .vectorspace import NormKind, dual_ball_grid_max, dual_norm, project_dual_ball

# weights are renormalized once they drift past this, which leaves theta unchanged
_RESCALE_AT = 1e150


class Learner:
    t: int

    def current(self) -> np.ndarray:
        raise NotImplementedError

    def observe_linear(self, z) -> "Learner":
        raise NotImplementedError


@dataclass
class OgdBall(Learner):
    dim: int
    norm: NormKind = NormKind.EUCLIDEAN
    radius: float = 1.0
    grad_bound: float | None = None
    constant_step: float | None = None
    initial: np.ndarray | None = None
    iterate: np.ndarray = field(init=False)
    t: int = field(init=False, default=1)

    def __post_init__(self):
        self.norm = NormKind.parse(self.norm)
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        if self.grad_bound is None:
            # supergradients here are differences of points of [0,1]^d
            self.grad_bound = math.sqrt(self.dim)
        start = np.zeros(self.dim) if self.initial is None else np.asarray(self.initial, float)
        self.iterate = project_dual_ball(start, self.norm, self.radius)

    def step_size(self) -> float:
        if self.constant_step is not None:
            return float(self.constant_step)
        if self.radius == 0 or self.grad_bound == 0:
            return 0.0
        return 2.0 * self.radius / (self.grad_bound * math.sqrt(self.t))

    def current(self):
        return self.iterate.copy()

    def observe_linear(self, z):
        z = np.asarray(z, dtype=float)
        self.iterate = project_dual_ball(self.iterate + self.step_size() * z, self.norm, self.radius)
        self.t += 1
        return self


@dataclass
class MwSimplex(Learner):
    """theta_j = w_j / (w0 + sum w) with the origin expert w0 (or w_j / sum w without it)."""

    dim: int
    epsilon: float = 0.1
    payoff_cap: float = 1.0
    includes_origin: bool = True
    weights: np.ndarray = field(init=False)
    origin_weight: float = field(init=False, default=1.0)
    t: int = field(init=False, default=1)

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.payoff_cap <= 0:
            raise ValueError("payoff cap must be positive")
        self.weights = np.ones(self.dim)
        self.origin_weight = 1.0 if self.includes_origin else 0.0

    def current(self):
        return self.weights / (self.origin_weight + self.weights.sum())

    def observe_linear(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(np.abs(z) > self.payoff_cap * (1 + 1e-12)):
            raise ValueError(f"payoff {z} exceeds the cap M={self.payoff_cap}")
        self.weights = self.weights * (1.0 + self.epsilon) ** (z / self.payoff_cap)
        top = max(self.origin_weight, float(self.weights.max()))
        if top > _RESCALE_AT:
            self.weights /= top
            self.origin_weight /= top
        self.t += 1
        return self


@dataclass
class SignedMw(Learner):
    """MW over {+e_j, -e_j, 0} scaled by ``radius``; the iterate is the weighted mean."""

    dim: int
    epsilon: float = 0.1
    payoff_cap: float = 1.0
    radius: float = 1.0
    log_weights: np.ndarray = field(init=False)
    t: int = field(init=False, default=1)

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        self.log_weights = np.zeros(2 * self.dim + 1)

    def _probs(self):
        lw = self.log_weights - self.log_weights.max()
        p = np.exp(lw)
        return p / p.sum()

    def current(self):
        p = self._probs()
        return self.radius * (p[: self.dim] - p[self.dim: 2 * self.dim])

    def observe_linear(self, z):
        z = np.asarray(z, dtype=float) * self.radius
        if np.any(np.abs(z) > self.payoff_cap * (1 + 1e-12)):
            raise ValueError(f"payoff {z} exceeds the cap M={self.payoff_cap}")
        gains = np.concatenate([z, -z, [0.0]]) / self.payoff_cap
        self.log_weights = self.log_weights + math.log1p(self.epsilon) * gains
        self.t += 1
        return self


@dataclass
class StronglyConcaveOgd(Learner):
    lower: np.ndarray
    upper: np.ndarray
    strong_concavity: float
    grad_bound: float | None = None
    initial: np.ndarray | None = None
    iterate: np.ndarray = field(init=False)
    t: int = field(init=False, default=1)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("empty projection box")
        if not self.strong_concavity > 0:
            raise ValueError("strong concavity H must be positive")
        start = np.zeros_like(self.lower) if self.initial is None else np.asarray(self.initial, float)
        self.iterate = np.clip(start, self.lower, self.upper)

    def current(self):
        return self.iterate.copy()

    def observe_linear(self, z):
        eta = 1.0 / (self.strong_concavity * self.t)
        self.iterate = np.clip(self.iterate + eta * np.asarray(z, float), self.lower, self.upper)
        self.t += 1
        return self


# ---------------------------------------------------------------------------
# offline hindsight maximization (test oracle)


@dataclass(frozen=True)
class BallDomain:
    dim: int
    norm: NormKind = NormKind.EUCLIDEAN
    radius: float = 1.0

    def project(self, x):
        return project_dual_ball(x, self.norm, self.radius)

    def sample(self, rng):
        return self.project(rng.uniform(-self.radius, self.radius, self.dim))

    def contains(self, x, tol=1e-12):
        return dual_norm(x, self.norm) <= self.radius + tol


@dataclass(frozen=True)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dim(self):
        return len(self.lower)

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def sample(self, rng):
        return rng.uniform(self.lower, self.upper)

    def contains(self, x, tol=1e-12):
        return bool(np.all(x >= np.asarray(self.lower) - tol) and np.all(x <= np.asarray(self.upper) + tol))


def hindsight_best(total_payoff, total_gradient, domain, restarts: int = 5,
                   iters: int = 400, seed: int = 0, grid_resolution: int | None = None):
    """Maximize a concave cumulative payoff over ``domain``.

    ``total_payoff`` maps an (n, d) array to n values; ``total_gradient`` maps a
    point to a supergradient. Projected gradient ascent from the origin and
    random starts, then (on ball domains of small dimension) a zooming grid
    search; the best point seen wins. Returns ``(theta, value)``.
    """
    rng = np.random.default_rng(seed)
    starts = [domain.project(np.zeros(domain.dim))] + [domain.sample(rng) for _ in range(restarts)]
    span = float(np.max(np.abs([domain.sample(rng) for _ in range(8)]))) + 1.0
    best = starts[0]
    best_val = float(total_payoff(best[None, :])[0])
    for x in starts:
        for k in range(1, iters + 1):
            g = np.asarray(total_gradient(x), dtype=float)
            gn = float(np.linalg.norm(g))
            if gn == 0:
                break
            x = domain.project(x + (span / math.sqrt(k)) * g / gn)
            val = float(total_payoff(x[None, :])[0])
            if val > best_val:
                best, best_val = x, val
    if isinstance(domain, BallDomain) and domain.dim <= 3:
        res = grid_resolution or (41 if domain.dim <= 2 else 15)
        pt, val = dual_ball_grid_max(total_payoff, domain.dim, domain.norm, domain.radius, res)
        if val > best_val:
            best, best_val = pt, val
    return np.asarray(best, dtype=float), best_val


def linear_regret(iterates, gradients, domain, **kwargs) -> float:
    """Regret of the iterates on linear payoffs g_t(theta) = z_t . theta."""
    Z = np.asarray(gradients, dtype=float)
    total = Z.sum(axis=0)
    got = float(np.sum(np.asarray(iterates) * Z))
    _, best = hindsight_best(lambda P: P @ total, lambda x: total, domain, **kwargs)
    return best - got
