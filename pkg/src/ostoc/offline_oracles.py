"""Offline benchmarks: integral brute force, the fractional optimum OPT^delta via
its dual, the packing LP, the sampled OPT estimate and the two Z estimators.

Fractional optimum
------------------
For delta >= 0 the relaxed offline problem

    max  f(xbar) + (1/T) sum_t r_t   s.t.  x_t in Conv(X_t),  d(xbar, S) <= delta

equals the minimum over phi (||phi||_* <= L) and mu (||mu||_* <= lambda_max) of

    F(phi, mu) = (-f)*(phi) + h_S(mu) + delta ||mu||_*
                 + (1/T) sum_t max_{(r, v) in X_t} (r - (phi + mu) . v)

with mu = lambda * theta. Any (phi, mu) gives an upper bound. F is minimized
by Kelley's cutting-plane method: the max over options, h_S and L1 norms are
exact LP rows, while the conjugate and Euclidean norms are approximated by
tangent cuts that are refined at every LP solution. The LP value is a lower
bound, so the returned gap is a certified accuracy.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .convex_sets import distance_many, support
from .instances import Instance
from .objectives import LinearReward, Objective, SeparableConcave, ZeroObjective
from .vectorspace import NormKind, dual_norm, ones_norm

BRUTE_FORCE_LIMIT = 10 ** 6
LAMBDA_MAX = 1e3
_TIEBREAK = 1e-10
_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class OracleError(ValueError):
    pass


@dataclass
class OracleResult:
    value: float
    method: str
    tolerance_achieved: float = 0.0
    feasible: bool = True
    lam: float | None = None
    phi: np.ndarray | None = None
    theta: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"value": self.value, "method": self.method,
               "tolerance_achieved": self.tolerance_achieved, "feasible": self.feasible}
        if self.lam is not None:
            out["lambda"] = self.lam
        return out


def _has_rewards(instance: Instance) -> bool:
    return instance.has_rewards and instance.objective.uses_rewards


# ---------------------------------------------------------------------------
# brute force


def _enumerate(instance: Instance, steps):
    d = instance.d
    sums = np.zeros((1, d))
    rew = np.zeros(1)
    use_r = _has_rewards(instance)
    for t in steps:
        req = instance.requests[t]
        sums = (sums[:, None, :] + req.V[None, :, :]).reshape(-1, d)
        if use_r:
            rew = (rew[:, None] + req.R[None, :]).reshape(-1)
    return sums / instance.T, rew / instance.T


def brute_force_opt(instance: Instance, delta: float = 0.0, reverse: bool = False) -> OracleResult:
    """Best integral choice (one option per step) with d(avg, S) <= delta."""
    count = math.prod(r.k for r in instance.requests)
    if count > BRUTE_FORCE_LIMIT:
        raise OracleError(f"{count} combinations exceed the brute-force limit")
    steps = range(instance.T - 1, -1, -1) if reverse else range(instance.T)
    avg, rew = _enumerate(instance, steps)
    ok = distance_many(avg, instance.set_spec) <= delta + 1e-12
    if not ok.any():
        return OracleResult(-math.inf, "brute_force", feasible=False)
    if _has_rewards(instance):
        vals = rew
    else:
        vals = np.asarray(instance.objective.value(avg), dtype=float).reshape(-1)
    return OracleResult(float(vals[ok].max()), "brute_force")


# ---------------------------------------------------------------------------
# fractional optimum via the dual


def _initial_cut_points(f: Objective) -> list[np.ndarray]:
    pts = [np.full(f.dim, x) for x in np.linspace(0.0, 1.0, 11)]
    if isinstance(f, SeparableConcave):
        for p in f.pieces:
            if p.breakpoints is None:
                break
        else:
            width = max(len(p.breakpoints) for p in f.pieces)
            for b in range(width):
                pts.append(np.array([p.breakpoints[min(b, len(p.breakpoints) - 1)] for p in f.pieces]))
    return pts


def _dual_value(instance, f, rewards, delta, phi, mu):
    S = instance.set_spec
    w = phi + mu
    inner = 0.0
    for req in instance.requests:
        sc = -(req.V @ w)
        if rewards:
            sc = sc + req.R
        inner += float(sc.max())
    return (f.conjugate(phi) + support(S, mu) + delta * dual_norm(mu, S.distance_norm)
            + inner / instance.T)


def _solve_dual(instance: Instance, f: Objective, rewards: bool, delta: float,
                lam_max: float = LAMBDA_MAX, tol: float = 1e-9, max_iter: int = 500):
    S = instance.set_spec
    kind = S.distance_norm
    d, T = instance.d, instance.T
    L = float(f.lipschitz(kind))
    # variable layout: phi | p (|phi| aux) | mu+ | mu- | c | s | n
    iphi, ip, imp, imm = 0, d, 2 * d, 3 * d
    ic, is_, inn = 4 * d, 5 * d, 5 * d + T
    nv = inn + 1

    cost = np.zeros(nv)
    cost[ic:ic + d] = 1.0
    cost[imp:imp + d] = S.upper
    cost[imm:imm + d] = -S.lower
    cost[is_:is_ + T] = 1.0 / T
    cost[inn] = delta + _TIEBREAK

    bounds = [(-L, L)] * d + [(0, L)] * d + [(0, None)] * (2 * d) + [(None, None)] * (d + T) + [(0, lam_max)]

    rows, rhs = [], []

    def add(cols, vals, b):
        rows.append((np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float)))
        rhs.append(float(b))

    ar = np.arange(d)
    for t, req in enumerate(instance.requests):
        for i in range(req.k):
            v = req.V[i]
            add(np.concatenate([[is_ + t], iphi + ar, imp + ar, imm + ar]),
                np.concatenate([[-1.0], -v, -v, v]),
                -(float(req.R[i]) if rewards else 0.0))

    def conj_cut(x):
        fx = f.coord_values(x)
        for j in range(d):
            add([ic + j, iphi + j], [-1.0, x[j]], -float(fx[j]))

    for x in _initial_cut_points(f):
        conj_cut(x)

    def norm_mu_cut(g):
        add(np.concatenate([imp + ar, imm + ar, [inn]]), np.concatenate([g, -g, [-1.0]]), 0.0)

    def norm_phi_cut(g):
        add(iphi + ar, g, L)

    if kind is NormKind.MAX_ABS:
        add(np.concatenate([imp + ar, imm + ar, [inn]]),
            np.concatenate([np.ones(2 * d), [-1.0]]), 0.0)
        for j in range(d):
            add([iphi + j, ip + j], [1.0, -1.0], 0.0)
            add([iphi + j, ip + j], [-1.0, -1.0], 0.0)
        add(ip + ar, np.ones(d), L)
    else:
        for j in range(d):
            for sgn in (1.0, -1.0):
                g = np.zeros(d)
                g[j] = sgn
                norm_mu_cut(g)

    def matrix():
        indptr = np.cumsum([0] + [len(c) for c, _ in rows])
        cols = np.concatenate([c for c, _ in rows])
        vals = np.concatenate([v for _, v in rows])
        return sparse.csr_matrix((vals, cols, indptr), shape=(len(rows), nv))

    best = (math.inf, None, None)
    lower = -math.inf
    for _ in range(max_iter):
        res = linprog(cost, A_ub=matrix(), b_ub=np.array(rhs), bounds=bounds,
                      method="highs-ds", options=_HIGHS)
        if res.status != 0:
            raise OracleError(f"dual LP failed: {res.message}")
        x = res.x
        lower = max(lower, float(res.fun) - _TIEBREAK * x[inn])
        phi = x[iphi:iphi + d]
        mu = x[imp:imp + d] - x[imm:imm + d]
        val = _dual_value(instance, f, rewards, delta, phi, mu)
        if val < best[0] - 1e-15 or best[1] is None:
            best = (val, phi.copy(), mu.copy())
        if best[0] - lower <= tol * max(1.0, abs(best[0])):
            break
        added = False
        cvals, xstar = f.conjugate_coords(phi)
        if np.any(cvals > x[ic:ic + d] + 1e-13):
            conj_cut(xstar)
            added = True
        if kind is NormKind.EUCLIDEAN:
            nm = float(np.linalg.norm(mu))
            if nm > x[inn] + 1e-13:
                norm_mu_cut(mu / nm)
                added = True
            nphi = float(np.linalg.norm(phi))
            if nphi > L * (1 + 1e-12) and nphi > 0:
                norm_phi_cut(phi / nphi)
                added = True
        if not added:
            break
    val, phi, mu = best
    return val, max(0.0, val - lower), phi, mu


def min_distance(instance: Instance) -> float:
    """Smallest d(xbar, S) over fractional choices x_t in Conv(X_t)."""
    val, _, _, _ = _solve_dual(instance, ZeroObjective(instance.d), False, 0.0, lam_max=1.0)
    return max(0.0, -val)


def fractional_opt(instance: Instance, delta: float = 0.0, tol: float = 1e-9) -> OracleResult:
    """OPT^delta over Conv(X_t) choices, with the dual certificate (lambda, phi, theta)."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    gap = min_distance(instance)
    if gap > delta + 1e-7:
        return OracleResult(-math.inf, "dual_cutting_plane", feasible=False,
                            extra={"min_distance": gap})
    rewards = _has_rewards(instance)
    f = instance.objective
    val, tol_got, phi, mu = _solve_dual(instance, f, rewards, delta, tol=tol)
    lam = dual_norm(mu, instance.set_spec.distance_norm)
    theta = mu / lam if lam > 0 else np.zeros_like(mu)
    if lam >= 0.999 * LAMBDA_MAX:
        warnings.warn("dual multiplier reached its cap; the value may be inaccurate")
    return OracleResult(val, "dual_cutting_plane", tol_got, True, lam, phi, theta)


def opt_delta_curve(instance: Instance, deltas, fd_step: float = 1e-5):
    """[(delta, OPT^delta)] plus the finite-difference slope at 0 (numerical Z*)."""
    deltas = [float(x) for x in deltas]
    if any(b < a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta grid must be sorted ascending")
    curve = [(dl, fractional_opt(instance, dl).value) for dl in deltas]
    z_star = (fractional_opt(instance, fd_step).value - fractional_opt(instance, 0.0).value) / fd_step
    return curve, z_star


# ---------------------------------------------------------------------------
# packing


def _packing_lp(requests, budget: float):
    """min sum_t beta_t + budget * sum_j theta_j  s.t. beta_t >= r - v . theta, beta, theta >= 0."""
    T = len(requests)
    d = requests[0].V.shape[1]
    cost = np.concatenate([np.ones(T), np.full(d, budget)])
    data, cols, b = [], [], []
    for t, req in enumerate(requests):
        for i in range(req.k):
            if req.R[i] <= 0:
                continue
            cols.append(np.concatenate([[t], T + np.arange(d)]))
            data.append(np.concatenate([[-1.0], -req.V[i]]))
            b.append(-req.R[i])
    if not b:
        return 0.0, np.zeros(d)
    indptr = np.arange(len(b) + 1) * (d + 1)
    A = sparse.csr_matrix((np.concatenate(data), np.concatenate(cols), indptr), shape=(len(b), T + d))
    res = linprog(cost, A_ub=A, b_ub=np.array(b), bounds=[(0, None)] * (T + d),
                  method="highs-ds", options=_HIGHS)
    if res.status != 0:
        raise OracleError(f"packing LP failed: {res.message}")
    return float(res.fun), res.x[T:]


def packing_opt_sum(instance: Instance, budget_scale: float = 1.0) -> OracleResult:
    """Total-reward LP optimum with budget budget_scale * B, solved in the dual."""
    if instance.kind != "packing":
        raise ValueError("packing_opt_sum needs a packing instance")
    val, theta = _packing_lp(instance.requests, budget_scale * instance.budget)
    return OracleResult(val, "packing_dual", 1e-9 * max(1.0, val), theta=theta)


def eta_param(d: int, rho: float) -> float:
    return math.sqrt(3.0 * math.log((d + 2) / rho))


def sampled_opt_hat(instance: Instance, delta: float, rho: float, seed: int | None = None,
                    prefix=None) -> float:
    """LP optimum of a ceil(delta T) request sample under the inflated budget, divided by
    the realized sample fraction. ``prefix`` (a request list) replaces random sampling."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    T = instance.T
    n = math.ceil(delta * T - 1e-12)
    if prefix is None:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(T, size=n, replace=False))
        sample = [instance.requests[int(i)] for i in pick]
    else:
        sample = list(prefix)[:n]
    frac = n / T
    eta = eta_param(instance.d, rho)
    budget = frac * instance.budget + eta * math.sqrt(frac * instance.budget)
    val, _ = _packing_lp(sample, budget)
    return val / frac


def packing_z_delta(d: int, epsilon: float) -> float:
    rho = epsilon ** 2
    eta = eta_param(d, rho)
    if d <= 1:
        return 1.0
    return min(1.0, 4.0 * eta ** 2 * epsilon ** 2 / math.log(d))


def estimate_z_packing(instance: Instance, epsilon: float, stream=None) -> float:
    """Z = 2 OPT-hat / B from the first ceil(delta T) requests of ``stream``
    (a request sequence in arrival order; the instance order if omitted)."""
    T, B = instance.T, instance.budget
    if min(B, T) < math.log(max(instance.d, 2)) / epsilon ** 2:
        warnings.warn("budget is below log(d)/eps^2; the Z estimate may fall outside its bracket")
    delta = packing_z_delta(instance.d, epsilon)
    if delta * T < 1:
        raise OracleError("sample too small: delta * T < 1")
    reqs = list(instance.requests) if stream is None else list(stream)
    opt_hat = sampled_opt_hat(instance, delta, epsilon ** 2, prefix=reqs)
    return 2.0 * opt_hat / B


# ---------------------------------------------------------------------------
# phased Z estimate


def phased_gamma(d: int, n: int, kind: NormKind | str) -> float:
    return ones_norm(d, kind) * math.sqrt(math.log(d * n) / n)


def estimate_z_phased(prefix: Instance, L: float, kind: NormKind | str | None = None) -> float:
    """(OPT-hat^{4 gamma} - OPT-hat^{gamma}) / gamma + 2L on a prefix instance."""
    n = prefix.T
    if n < 2:
        raise OracleError("prefix must contain at least two steps")
    kind = prefix.set_spec.distance_norm if kind is None else NormKind.parse(kind)
    gamma = phased_gamma(prefix.d, n, kind)
    hi = fractional_opt(prefix, 4.0 * gamma)
    if not hi.feasible:
        raise OracleError(f"prefix infeasible at relaxation {4 * gamma:.4g} "
                          f"(min distance {hi.extra.get('min_distance'):.4g})")
    lo = fractional_opt(prefix, gamma)
    lo_val = lo.value if lo.feasible else hi.value
    # OPT^delta is nondecreasing; clip solver noise
    return max(0.0, hi.value - lo_val) / gamma + 2.0 * L


def offline_opt(instance: Instance, delta: float = 0.0) -> OracleResult:
    """Fractional benchmark used for regret: the linear-reward or objective OPT^delta."""
    if instance.kind == "packing":
        res = packing_opt_sum(instance)
        return OracleResult(res.value / instance.T, res.method, res.tolerance_achieved / instance.T,
                            theta=res.theta)
    return fractional_opt(instance, delta)


def reward_objective(instance: Instance) -> Objective:
    return LinearReward(instance.d) if _has_rewards(instance) else instance.objective
