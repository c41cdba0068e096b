"""Regret metrics for a finished run."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..algorithms import RunTrace
from ..convex_sets import distance, squared_distance
from ..instances import Instance, StreamOrder
from ..offline_oracles import OracleResult
from ..vectorspace import norm


@dataclass
class MetricsSummary:
    regret1: float | None
    regret2: float
    ratio: float | None
    tau: int
    T: int
    objective: float
    total_reward: float
    opt: float | None
    opt_tolerance: float | None
    available: bool
    q_gap: list | None = field(default=None)

    def to_dict(self) -> dict:
        return asdict(self)


def achieved_objective(trace: RunTrace, instance: Instance) -> float:
    """f(vbar), or the average reward when the objective is reward-based."""
    if instance.objective.uses_rewards:
        return trace.total_reward / trace.T
    return float(instance.objective.value(np.clip(trace.vbar, 0.0, 1.0)))


def constraint_metric(trace: RunTrace, instance: Instance) -> float:
    """d(vbar, S); for the smooth algorithm the squared Euclidean distance h(vbar)."""
    if trace.algorithm == "smooth":
        return squared_distance(trace.vbar, instance.set_spec)
    return distance(trace.vbar, instance.set_spec)


def compute_metrics(trace: RunTrace, instance: Instance, oracle: OracleResult | None,
                    q_gap: list | None = None) -> MetricsSummary:
    """Fill regret1 = OPT - achieved, regret2, and for packing the competitive ratio.

    ``oracle`` holds the per-step average benchmark (for packing, OPT_sum / T).
    Without a usable oracle the OPT-based fields are None rather than zero.
    """
    obj = achieved_objective(trace, instance)
    reg2 = constraint_metric(trace, instance)
    ok = oracle is not None and oracle.feasible and math.isfinite(oracle.value)
    opt = oracle.value if ok else None
    reg1 = None
    ratio = None
    if ok:
        reg1 = opt - obj
        if trace.algorithm == "packing":
            opt_sum = opt * trace.T
            ratio = trace.total_reward / opt_sum if opt_sum > 0 else 1.0
    if trace.algorithm == "feasibility":
        reg1 = 0.0
    return MetricsSummary(reg1, reg2, ratio, trace.tau, trace.T, obj, trace.total_reward, opt,
                          oracle.tolerance_achieved if ok else None, ok, q_gap)


def q_gap(instance: Instance, order: StreamOrder, Z: float, assignment=None) -> list[float]:
    """Q(t) = Z ||E[v*] - E[v* | first t-1 arrivals]|| + |E[r*] - E[r* | ...]| under RP.

    v*, r* are the offline choices of ``assignment`` (one option index per
    request; the instance witness by default). Conditioning on the history
    leaves the not-yet-seen requests equally likely, so the conditional mean is
    the mean over the remaining ones.
    """
    assignment = instance.witness if assignment is None else assignment
    if assignment is None:
        raise ValueError("q_gap needs an offline assignment")
    Vs = np.array([instance.requests[t].V[i] for t, i in enumerate(assignment)])
    Rs = np.array([0.0 if instance.requests[t].R is None else instance.requests[t].R[i]
                   for t, i in enumerate(assignment)])
    kind = instance.set_spec.distance_norm
    mv, mr = Vs.mean(axis=0), Rs.mean()
    rem_v, rem_r = Vs.sum(axis=0), Rs.sum()
    out = []
    n = len(order.order)
    for t in range(n):
        left = n - t
        out.append(Z * norm(mv - rem_v / left, kind) + abs(mr - rem_r / left))
        j = int(order.order[t])
        rem_v = rem_v - Vs[j]
        rem_r = rem_r - Rs[j]
    return out
