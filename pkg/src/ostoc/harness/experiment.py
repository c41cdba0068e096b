"""Single runs, file emission and Monte-Carlo sweeps."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import instances as inst_mod
from ..algorithms import RunConfig, RunTrace, run
from ..instances import Instance, StreamOrder, make_order, realize
from ..offline_oracles import (OracleResult, estimate_z_packing, fractional_opt, min_distance,
                               offline_opt)
from .metrics import MetricsSummary, compute_metrics, q_gap

SUMMARY_SCHEMA = 1
SWEEP_COLUMNS = ("algo", "T", "seed", "regret1", "regret2", "ratio", "tau",
                 "kind", "d", "B", "epsilon", "stream", "wall_clock_s")


class InfeasibleInstance(RuntimeError):
    pass


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(_canonical(config.to_dict()).encode()).hexdigest()


def benchmark(instance: Instance, order: StreamOrder) -> OracleResult | None:
    """Offline OPT for the run: the fixed instance under RP, the realized sample under IID."""
    target = instance if order.mode == "rp" else realize(instance, order)
    res = offline_opt(target)
    return res if res.feasible else None


def choose_z(instance: Instance, config: RunConfig, order: StreamOrder) -> float | None:
    """Z used when the config leaves it open.

    packing: estimated from the arriving stream's prefix. general, linear,
    smooth: the optimal dual multiplier of the distance constraint on the
    instance (the smallest Z satisfying the trade-off property).
    """
    if config.Z is not None or config.algorithm in ("feasibility", "phased"):
        return config.Z
    if config.algorithm == "packing":
        return estimate_z_packing(instance, config.epsilon, order.requests(instance))
    res = fractional_opt(instance, 0.0)
    if not res.feasible:
        raise InfeasibleInstance("instance has no feasible fractional solution")
    return float(res.lam)


def check_feasible(instance: Instance) -> None:
    if instance.kind == "packing":
        return
    gap = min_distance(instance)
    if gap > 1e-7:
        raise InfeasibleInstance(f"no fractional choice reaches S (min distance {gap:.4g})")


@dataclass
class RunResult:
    trace: RunTrace
    metrics: MetricsSummary
    config: RunConfig
    instance_hash: str
    Z: float | None
    oracle: OracleResult | None
    wall_clock_s: float = field(default=0.0)


def execute(instance: Instance, config: RunConfig, with_q_gap: bool = False,
            with_oracle: bool = True) -> RunResult:
    t0 = time.perf_counter()
    order = make_order(instance, config.stream, config.seed, config.T_out)
    Z = choose_z(instance, config, order)
    cfg = RunConfig(**{**config.to_dict(), "Z": Z})
    trace = run(instance, cfg, order)
    oracle = benchmark(instance, order) if with_oracle else None
    qg = None
    if with_q_gap and order.mode == "rp" and instance.witness is not None:
        qg = q_gap(instance, order, Z or 0.0)
    metrics = compute_metrics(trace, instance, oracle, qg)
    return RunResult(trace, metrics, cfg, instance.digest(), Z, oracle,
                     time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# emission


def _fmt(x) -> str:
    return repr(float(x))


def trace_csv(trace: RunTrace) -> str:
    """Columns: t, idx, r, v_1..v_d, theta_1..theta_d, phi_1..phi_d, cum_budget_1..d."""
    d = trace.V.shape[1] if trace.V.size else trace.theta.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "idx", "r"] + [f"v_{j+1}" for j in range(d)] + [f"theta_{j+1}" for j in range(d)]
               + [f"phi_{j+1}" for j in range(d)] + [f"cum_budget_{j+1}" for j in range(d)])
    cum = np.cumsum(trace.V, axis=0)
    for n in range(trace.steps):
        r = "" if trace.R is None else _fmt(trace.R[n])
        phi = [""] * d if trace.phi is None else [_fmt(x) for x in trace.phi[n]]
        w.writerow([n + 1, int(trace.idx[n]), r] + [_fmt(x) for x in trace.V[n]]
                   + [_fmt(x) for x in trace.theta[n]] + phi + [_fmt(x) for x in cum[n]])
    return buf.getvalue()


def summary_json(result: RunResult) -> str:
    """Versioned summary; everything in it is a function of (instance, config, seed)."""
    doc = {
        "schema_version": SUMMARY_SCHEMA,
        "instance_hash": result.instance_hash,
        "config_hash": config_hash(result.config),
        "config": result.config.to_dict(),
        "seed": result.config.seed,
        "stream": result.config.stream,
        "Z": result.Z,
        "Z_phases": [float(z) for z in result.trace.Z_used] if result.config.algorithm == "phased" else None,
        "metrics": result.metrics.to_dict(),
        "oracle": None if result.oracle is None else result.oracle.to_dict(),
        "budget": result.trace.budget,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_run(result: RunResult, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tp, sp = out / "trace.csv", out / "summary.json"
    tp.write_text(trace_csv(result.trace))
    sp.write_text(summary_json(result))
    return tp, sp


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class ExperimentSpec:
    """A grid of generated instances x algorithm settings x seeds."""

    algorithm: str
    kind: str
    d: int = 2
    k: int = 3
    T_values: tuple = (200,)
    seeds: tuple = (0,)
    budget_fractions: tuple = (None,)
    epsilons: tuple = (0.1,)
    stream: str = "rp"
    Z: float | None = None
    slack: float = 0.0
    norm: str = "maxabs"
    objective: str = "log"
    beta: float = 1.0
    instance_seed: int | None = None
    with_oracle: bool = True

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        for key in ("T_values", "seeds", "budget_fractions", "epsilons"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def jobs(self):
        for T in self.T_values:
            for bf in self.budget_fractions:
                for eps in self.epsilons:
                    for seed in self.seeds:
                        yield (self, int(T), bf, float(eps), int(seed))


def _instance_for(spec: ExperimentSpec, T: int, bf, seed: int) -> Instance:
    iseed = seed if spec.instance_seed is None else spec.instance_seed
    budget = None if bf is None else float(bf) * T
    return inst_mod.generate(spec.kind, spec.d, T, spec.k, iseed, budget=budget, slack=spec.slack,
                             norm=spec.norm, objective=spec.objective, beta=spec.beta)


def run_job(job) -> dict:
    spec, T, bf, eps, seed = job
    instance = _instance_for(spec, T, bf, seed)
    cfg = RunConfig(spec.algorithm, Z=spec.Z, epsilon=eps, stream=spec.stream, seed=seed)
    res = execute(instance, cfg, with_oracle=spec.with_oracle)
    m = res.metrics
    return {"algo": spec.algorithm, "T": T, "seed": seed, "regret1": m.regret1,
            "regret2": m.regret2, "ratio": m.ratio, "tau": m.tau, "kind": spec.kind,
            "d": spec.d, "B": instance.budget, "epsilon": eps, "stream": spec.stream,
            "wall_clock_s": res.wall_clock_s}


def worker_count() -> int:
    env = os.environ.get("OSTOC_THREADS")
    n = int(env) if env else (os.cpu_count() or 1)
    return max(1, n)


def sweep(spec: ExperimentSpec, workers: int | None = None) -> list[dict]:
    jobs = list(spec.jobs())
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs))


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in SWEEP_COLUMNS})
