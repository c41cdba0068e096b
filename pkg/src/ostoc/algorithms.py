"""The online primal-dual algorithms.

Each run walks a stream of requests once. At step t the algorithm scores every
option with the current dual iterates, commits the best one (lowest index on
ties), then feeds the learners a supergradient of the round's payoff.

=============  ====================================================  ============
algorithm      selection                                             dual state
=============  ====================================================  ============
feasibility    argmin  theta . v                                     theta
general        argmax  -phi . v - 2 (Z + L) theta . v                theta, phi
linear         argmax  r - 2 Z theta . v                             theta
packing        argmax  r - Z theta . v, stop once a budget is used   theta (MW)
smooth         argmax  -phi . v - 2 Z theta . v                      theta, phi
=============  ====================================================  ============
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convex_sets import distance, support_argmax
from .instances import Instance, StreamOrder, make_order
from .objectives import SquaredDistancePenalty, UnsupportedVariant
from .oco import Learner, MwSimplex, OgdBall, SignedMw, StronglyConcaveOgd
from .vectorspace import NormKind, dual_norm

ALGORITHMS = ("feasibility", "general", "linear", "packing", "smooth", "phased")


@dataclass
class RunConfig:
    algorithm: str
    Z: float | None = None
    epsilon: float = 0.1
    theta_learner: str = "ogd"
    phi_learner: str = "ogd"
    grad_bound: float | None = None
    mw_epsilon: float = 0.1
    stream: str = "rp"
    seed: int = 0
    T_out: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.stream not in ("rp", "iid"):
            raise ValueError(f"unknown stream mode {self.stream!r}")
        if self.algorithm == "packing" and not 0 < self.epsilon < 1:
            raise ValueError("packing needs epsilon in (0, 1)")
        if self.Z is not None and self.Z < 0:
            raise ValueError("Z must be non-negative")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class RunTrace:
    algorithm: str
    T: int
    order: np.ndarray
    idx: np.ndarray
    V: np.ndarray
    R: np.ndarray | None
    theta: np.ndarray
    phi: np.ndarray | None
    tau: int
    budget: float | None = None
    Z_used: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.idx)

    @property
    def vbar(self) -> np.ndarray:
        """Average chosen vector over the horizon T (steps after a stop count as zero)."""
        return self.V.sum(axis=0) / self.T

    @property
    def total_reward(self) -> float:
        return 0.0 if self.R is None else float(self.R.sum())

    @property
    def consumption(self) -> np.ndarray:
        return self.V.sum(axis=0)

    @property
    def overshoot(self) -> np.ndarray:
        if self.budget is None:
            return np.zeros(self.V.shape[1])
        return np.maximum(self.consumption - self.budget, 0.0)


class _Recorder:
    def __init__(self, algorithm, T, d, order, rewards, phi, budget=None):
        self.algorithm, self.T, self.order, self.budget = algorithm, T, order, budget
        self.idx = np.zeros(T, dtype=np.int64)
        self.V = np.zeros((T, d))
        self.R = np.zeros(T) if rewards else None
        self.theta = np.zeros((T, d))
        self.phi = np.zeros((T, d)) if phi else None
        self.n = 0

    def record(self, i, v, r, theta, phi=None):
        n = self.n
        self.idx[n] = i
        self.V[n] = v
        self.theta[n] = theta
        if self.R is not None:
            self.R[n] = r
        if self.phi is not None:
            self.phi[n] = phi
        self.n += 1

    def finish(self, Z_used=()):
        n = self.n
        return RunTrace(self.algorithm, self.T, self.order, self.idx[:n].copy(), self.V[:n].copy(),
                        None if self.R is None else self.R[:n].copy(), self.theta[:n].copy(),
                        None if self.phi is None else self.phi[:n].copy(), n, self.budget,
                        list(Z_used))


def _stream(instance: Instance, config: RunConfig, order: StreamOrder | None) -> StreamOrder:
    return order if order is not None else make_order(instance, config.stream, config.seed, config.T_out)


def _theta_learner(instance: Instance, config: RunConfig) -> Learner:
    d, kind = instance.d, instance.set_spec.distance_norm
    if config.theta_learner == "ogd":
        return OgdBall(d, kind, 1.0, config.grad_bound)
    if config.theta_learner == "signed_mw":
        if kind is not NormKind.MAX_ABS:
            raise ValueError("signed MW covers the L1 ball, so the set norm must be maxabs")
        return SignedMw(d, config.mw_epsilon)
    raise ValueError(f"unknown theta learner {config.theta_learner!r}")


def _phi_learner(instance: Instance, config: RunConfig, L: float) -> Learner:
    if config.phi_learner != "ogd":
        raise ValueError(f"unknown phi learner {config.phi_learner!r}")
    return OgdBall(instance.d, instance.set_spec.distance_norm, L, config.grad_bound)


def select_feasibility(V: np.ndarray, theta: np.ndarray) -> int:
    return int(np.argmin(V @ theta))


def select_general(V, theta, phi, Z, L) -> int:
    return int(np.argmax(-(V @ phi) - 2.0 * (Z + L) * (V @ theta)))


def select_linear(V, R, theta, Z) -> int:
    return int(np.argmax(R - 2.0 * Z * (V @ theta)))


def select_packing(V, R, theta, Z) -> int:
    return int(np.argmax(R - Z * (V @ theta)))


def run_feasibility(instance: Instance, config: RunConfig, order: StreamOrder | None = None) -> RunTrace:
    order = _stream(instance, config, order)
    S = instance.set_spec
    learner = _theta_learner(instance, config)
    rec = _Recorder("feasibility", len(order.order), instance.d, order.order, False, False)
    for req in order.requests(instance):
        theta = learner.current()
        i = select_feasibility(req.V, theta)
        v = req.V[i]
        rec.record(i, v, None, theta)
        learner.observe_linear(v - support_argmax(S, theta, hint=v))
    return rec.finish()


def _require_lipschitz(instance: Instance) -> float:
    L = instance.objective.lipschitz(instance.set_spec.distance_norm)
    if L is None or not math.isfinite(L):
        raise ValueError("objective has no Lipschitz constant")
    return float(L)


def run_general_cp(instance: Instance, config: RunConfig, order: StreamOrder | None = None,
                   Z: float | None = None) -> RunTrace:
    order = _stream(instance, config, order)
    Z = config.Z if Z is None else Z
    if Z is None:
        raise ValueError("general CP needs Z; use the phased algorithm to estimate it")
    S, f = instance.set_spec, instance.objective
    L = _require_lipschitz(instance)
    th = _theta_learner(instance, config)
    ph = _phi_learner(instance, config, L)
    rec = _Recorder("general", len(order.order), instance.d, order.order, False, True)
    for req in order.requests(instance):
        theta, phi = th.current(), ph.current()
        i = select_general(req.V, theta, phi, Z, L)
        v = req.V[i]
        rec.record(i, v, None, theta, phi)
        th.observe_linear(v - support_argmax(S, theta, hint=v))
        ph.observe_linear(v - f.conjugate_argmax(phi))
    return rec.finish([Z])


def run_linear_cp(instance: Instance, config: RunConfig, order: StreamOrder | None = None) -> RunTrace:
    order = _stream(instance, config, order)
    if not instance.has_rewards:
        raise ValueError("linear CP needs a reward on every option")
    if config.Z is None:
        raise ValueError("linear CP needs Z")
    S, Z = instance.set_spec, config.Z
    learner = _theta_learner(instance, config)
    rec = _Recorder("linear", len(order.order), instance.d, order.order, True, False)
    for req in order.requests(instance):
        theta = learner.current()
        i = select_linear(req.V, req.R, theta, Z)
        v = req.V[i]
        rec.record(i, v, req.R[i], theta)
        learner.observe_linear(v - support_argmax(S, theta, hint=v))
    return rec.finish([Z])


def run_packing(instance: Instance, config: RunConfig, order: StreamOrder | None = None) -> RunTrace:
    order = _stream(instance, config, order)
    if instance.kind != "packing" or instance.budget is None:
        raise ValueError("packing run needs a packing instance with a budget")
    if config.Z is None:
        raise ValueError("packing needs Z (see offline_oracles.estimate_z_packing)")
    T = len(order.order)
    B = float(instance.budget) * T / instance.T
    Z, d = config.Z, instance.d
    learner = MwSimplex(d, config.epsilon, 1.0, includes_origin=True)
    per_step = B / T
    used = np.zeros(d)
    rec = _Recorder("packing", T, d, order.order, True, False, budget=B)
    for req in order.requests(instance):
        theta = learner.current()
        i = select_packing(req.V, req.R, theta, Z)
        v = req.V[i]
        rec.record(i, v, req.R[i], theta)
        used += v
        if np.any(used >= B):
            break
        learner.observe_linear(v - per_step)
    return rec.finish([Z])


def run_smooth_cp(instance: Instance, config: RunConfig, order: StreamOrder | None = None) -> RunTrace:
    order = _stream(instance, config, order)
    S, f = instance.set_spec, instance.objective
    beta_f = f.smoothness_beta
    if not beta_f:
        raise UnsupportedVariant("smooth CP needs a strongly smooth objective")
    if config.Z is None:
        raise ValueError("smooth CP needs Z")
    Z = config.Z
    h = SquaredDistancePenalty(S.lower, S.upper)
    # the conjugates are strongly convex on the gradient ranges of h and of -f
    h_lo, h_hi = h.gradient_range_box()
    g_lo, g_hi = f.gradient_range_box()
    th = StronglyConcaveOgd(h_lo, h_hi, 1.0 / h.beta)
    ph = StronglyConcaveOgd(-g_hi, -g_lo, 1.0 / beta_f)
    rec = _Recorder("smooth", len(order.order), instance.d, order.order, False, True)
    for req in order.requests(instance):
        theta, phi = th.current(), ph.current()
        i = int(np.argmax(-(req.V @ phi) - 2.0 * Z * (req.V @ theta)))
        v = req.V[i]
        rec.record(i, v, None, theta, phi)
        th.observe_linear(v - h.conjugate_argmax(theta, hint=v))
        ph.observe_linear(v - f.conjugate_argmax(phi))
    return rec.finish([Z])


def phase_bounds(T: int) -> list[tuple[int, int]]:
    """Phases of lengths 1, 1, 2, 4, ...; the last one is truncated at T."""
    bounds, start, length = [(0, 1)], 1, 1
    while start < T:
        bounds.append((start, min(T, start + length)))
        start += length
        length = start
    return [(a, b) for a, b in bounds if a < T]


def run_phased_cp(instance: Instance, config: RunConfig, order: StreamOrder | None = None) -> RunTrace:
    """General CP with Z re-estimated from the prefix at the start of every phase.

    The learners restart each phase. The first step takes option 0. A prefix of
    a single step is too short to estimate from, so that phase uses Z = 2L.
    """
    from .offline_oracles import estimate_z_phased

    order = _stream(instance, config, order)
    T = len(order.order)
    L = _require_lipschitz(instance)
    d = instance.d
    full = [instance.requests[int(i)] for i in order.order]
    idx, V, theta_all, phi_all, Z_used = [], [], [], [], []
    for a, b in phase_bounds(T):
        if a == 0:
            idx.append(0)
            V.append(full[0].V[0])
            theta_all.append(np.zeros(d))
            phi_all.append(np.zeros(d))
            continue
        if a >= 2:
            Z = estimate_z_phased(instance.with_requests(full[:a]), L, instance.set_spec.distance_norm)
        else:
            Z = 2.0 * L
        Z_used.append(Z)
        sub = StreamOrder(order.mode, order.seed, order.order[a:b])
        tr = run_general_cp(instance, config, sub, Z=Z)
        idx.extend(tr.idx)
        V.extend(tr.V)
        theta_all.extend(tr.theta)
        phi_all.extend(tr.phi)
    return RunTrace("phased", T, order.order, np.asarray(idx, dtype=np.int64), np.asarray(V),
                    None, np.asarray(theta_all), np.asarray(phi_all), T, None, Z_used)


_RUNNERS = {"feasibility": run_feasibility, "general": run_general_cp, "linear": run_linear_cp,
            "packing": run_packing, "smooth": run_smooth_cp, "phased": run_phased_cp}


def run(instance: Instance, config: RunConfig, order: StreamOrder | None = None) -> RunTrace:
    return _RUNNERS[config.algorithm](instance, config, order)


def check_dual_feasibility(trace: RunTrace, instance: Instance, tol: float = 1e-12) -> bool:
    """Every recorded theta (and phi) lies in its learner's domain."""
    kind = instance.set_spec.distance_norm
    if trace.algorithm == "packing":
        th = trace.theta
        return bool(np.all(th >= 0) and np.all(th.sum(axis=1) <= 1 + tol))
    if trace.algorithm == "smooth":
        h = SquaredDistancePenalty(instance.set_spec.lower, instance.set_spec.upper)
        h_lo, h_hi = h.gradient_range_box()
        g_lo, g_hi = instance.objective.gradient_range_box()
        return bool(np.all(trace.theta >= h_lo - tol) and np.all(trace.theta <= h_hi + tol)
                    and np.all(trace.phi >= -g_hi - tol) and np.all(trace.phi <= -g_lo + tol))
    ok = all(dual_norm(t, kind) <= 1 + tol for t in trace.theta)
    if trace.phi is not None:
        L = instance.objective.lipschitz(kind)
        ok = ok and all(dual_norm(p, kind) <= L + tol for p in trace.phi)
    return ok


def constraint_regret(trace: RunTrace, instance: Instance) -> float:
    return distance(trace.vbar, instance.set_spec)
