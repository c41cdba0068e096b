"""Instances, seeded generators, the .osp.jsonl format and the two input streams.

File format (one JSON document per line, optionally gzip-compressed)::

    {"format": "osp", "version": 1, "d": 2, "T": 3, "kind": "packing",
     "set": {...}, "objective": {...}, "B": 1.5, "witness": [0, 0, 0]}
    {"opts": [{"v": [0.0, 0.0], "r": 0.0}, {"v": [0.4, 0.1], "r": 0.7}]}
    ...

Randomness always comes from numpy's PCG64 (``numpy.random.default_rng``), so
a seed reproduces the same instance and stream on every platform.
"""
from __future__ import annotations

import gzip
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .convex_sets import BoxSet, budget_cap, cover_floor, distance
from .objectives import (CappedPiece, LinearReward, LogPiece, Objective, QuadraticConcave,
                         SeparableConcave, ZeroObjective, objective_from_dict)
from .vectorspace import NormKind

FORMAT_VERSION = 1
KINDS = ("feasibility", "general", "linear", "covering", "packing", "smooth")


class InstanceFormatError(ValueError):
    """Malformed instance file or inconsistent instance data."""


@dataclass(frozen=True)
class OptionItem:
    v: np.ndarray
    r: float | None = None


class Request:
    """One step's options, stored as a (k, d) matrix plus an optional reward vector."""

    __slots__ = ("V", "R")

    def __init__(self, V, R=None):
        V = np.array(V, dtype=float, ndmin=2)
        if V.shape[0] == 0:
            raise InstanceFormatError("a request needs at least one option")
        if not np.all(np.isfinite(V)) or np.any(V < 0) or np.any(V > 1):
            raise InstanceFormatError("option vectors must lie in [0, 1]^d")
        if R is not None:
            R = np.array(R, dtype=float).reshape(-1)
            if R.size != V.shape[0]:
                raise InstanceFormatError("one reward per option is required")
            if not np.all(np.isfinite(R)) or np.any(R < 0) or np.any(R > 1):
                raise InstanceFormatError("rewards must lie in [0, 1]")
            R.flags.writeable = False
        V.flags.writeable = False
        self.V, self.R = V, R

    @property
    def k(self) -> int:
        return self.V.shape[0]

    @property
    def options(self) -> tuple[OptionItem, ...]:
        return tuple(OptionItem(self.V[i], None if self.R is None else float(self.R[i]))
                     for i in range(self.k))

    def to_json(self) -> dict:
        opts = []
        for i in range(self.k):
            o = {"v": [float(x) for x in self.V[i]]}
            if self.R is not None:
                o["r"] = float(self.R[i])
            opts.append(o)
        return {"opts": opts}

    @classmethod
    def from_json(cls, data: dict) -> "Request":
        try:
            opts = data["opts"]
            V = [o["v"] for o in opts]
            has_r = ["r" in o for o in opts]
        except (KeyError, TypeError) as exc:
            raise InstanceFormatError(f"bad request line: {exc}") from None
        if any(has_r) and not all(has_r):
            raise InstanceFormatError("either every option carries a reward or none does")
        R = [o["r"] for o in opts] if all(has_r) and opts else None
        return cls(V, R)


@dataclass(frozen=True, eq=False)
class Instance:
    d: int
    T: int
    kind: str
    set_spec: BoxSet
    objective: Objective
    requests: tuple[Request, ...]
    budget: float | None = None
    witness: tuple[int, ...] | None = None
    iid_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InstanceFormatError(f"unknown kind {self.kind!r}")
        if len(self.requests) != self.T or self.T < 1:
            raise InstanceFormatError(f"expected {self.T} requests, got {len(self.requests)}")
        if self.set_spec.dim != self.d or self.objective.dim != self.d:
            raise InstanceFormatError("set/objective dimension does not match d")
        for req in self.requests:
            if req.V.shape[1] != self.d:
                raise InstanceFormatError("option dimension does not match d")
        if self.kind in ("linear", "packing") and any(r.R is None for r in self.requests):
            raise InstanceFormatError(f"{self.kind} instances need rewards on every option")
        if self.kind == "packing":
            if self.budget is None or self.budget <= 0:
                raise InstanceFormatError("packing instances need a positive budget B")
            for req in self.requests:
                zero = np.all(req.V == 0, axis=1) & (req.R == 0)
                if not zero.any():
                    raise InstanceFormatError("packing requests must contain the zero option")
        if self.witness is not None:
            if len(self.witness) != self.T:
                raise InstanceFormatError("witness length must equal T")
            for t, i in enumerate(self.witness):
                if not 0 <= i < self.requests[t].k:
                    raise InstanceFormatError("witness index out of range")

    @property
    def has_rewards(self) -> bool:
        return self.requests[0].R is not None

    def witness_average(self) -> np.ndarray:
        if self.witness is None:
            raise ValueError("instance carries no witness")
        return np.mean([self.requests[t].V[i] for t, i in enumerate(self.witness)], axis=0)

    def header(self) -> dict:
        h = {"format": "osp", "version": FORMAT_VERSION, "d": self.d, "T": self.T,
             "kind": self.kind, "set": self.set_spec.to_dict(),
             "objective": self.objective.to_dict(), "B": self.budget,
             "witness": None if self.witness is None else list(self.witness)}
        if self.iid_weights is not None:
            h["iid_weights"] = [float(w) for w in self.iid_weights]
        return h

    def dumps(self) -> str:
        lines = [json.dumps(self.header(), separators=(",", ":"))]
        lines += [json.dumps(r.to_json(), separators=(",", ":")) for r in self.requests]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def with_requests(self, requests: Sequence[Request], witness=None) -> "Instance":
        """Same set/objective/kind on a different request list (budget rescaled for packing)."""
        T = len(requests)
        budget = None if self.budget is None else self.budget * T / self.T
        return Instance(self.d, T, self.kind, self.set_spec, self.objective, tuple(requests),
                        budget, witness)


# ---------------------------------------------------------------------------
# serialization


def loads(text: str) -> Instance:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InstanceFormatError("empty instance file")
    try:
        head = json.loads(lines[0])
        body = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON: {exc}") from None
    if head.get("format") != "osp":
        raise InstanceFormatError("missing osp header line")
    if head.get("version") != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported version {head.get('version')}")
    try:
        set_spec = BoxSet.from_dict(head["set"])
        objective = objective_from_dict(head["objective"])
        witness = head.get("witness")
        weights = head.get("iid_weights")
        return Instance(int(head["d"]), int(head["T"]), head["kind"], set_spec, objective,
                        tuple(Request.from_json(b) for b in body), head.get("B"),
                        None if witness is None else tuple(int(i) for i in witness),
                        None if weights is None else np.asarray(weights, float))
    except InstanceFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"bad header: {exc}") from None


def load(path) -> Instance:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return loads(raw.decode("utf-8"))


def save(instance: Instance, path) -> None:
    path = Path(path)
    data = instance.dumps().encode("utf-8")
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as fh:
            fh.write(data)
        data = buf.getvalue()
    path.write_bytes(data)


# ---------------------------------------------------------------------------
# generators


def _random_objective(d: int, rng, family: str) -> Objective:
    if family == "log":
        return SeparableConcave([LogPiece(float(rng.uniform(0.5, 1.0)), float(rng.uniform(1.0, 4.0)))
                                 for _ in range(d)])
    if family == "capped":
        return SeparableConcave([CappedPiece(float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.2, 0.5)))
                                 for _ in range(d)])
    raise ValueError(f"unknown objective family {family!r}")


def _minmax_witness(Vs: np.ndarray) -> np.ndarray:
    """Per-step option indices approximately minimizing the largest average coordinate.

    Solves min c + 1e-3 * mean_j(xbar_j) s.t. xbar <= c over fractional choices
    (the small second term makes the optimum Pareto-minimal), then rounds every
    step to its heaviest option. A basic solution has at most d fractional
    steps, so rounding moves the average by at most d / T per coordinate.
    """
    T, k, d = Vs.shape
    n = T * k
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    cost[:n] = 1e-3 * Vs.reshape(n, d).mean(axis=1) / T
    A_ub = np.zeros((d, n + 1))
    A_ub[:, :n] = Vs.reshape(n, d).T / T
    A_ub[:, -1] = -1.0
    A_eq = sparse.csr_matrix((np.ones(n), (np.repeat(np.arange(T), k), np.arange(n))),
                             shape=(T, n + 1))
    res = linprog(cost, A_ub=sparse.csr_matrix(A_ub), b_ub=np.zeros(d), A_eq=A_eq, b_eq=np.ones(T),
                  bounds=[(0, None)] * (n + 1), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"witness LP failed: {res.message}")
    return np.argmax(res.x[:n].reshape(T, k), axis=1)


def _smooth_instance(d, T, k, rng, norm, beta, slack) -> Instance:
    """Quadratic objective with S capped where the unconstrained optimum sits.

    The witness picks, at every step, the option preferred by the gradient of
    f at the fluid optimum over [0, 1]^d (taken from the dual oracle), so S
    touches the optimum and the distance multiplier is essentially zero.
    """
    from .offline_oracles import fractional_opt

    f = QuadraticConcave(rng.uniform(0.0, 1.0, d), rng.uniform(0.0, 1.0, d), beta)
    Vs = rng.uniform(0.0, 1.0, (T, k, d))
    reqs = tuple(Request(V) for V in Vs)
    cube = BoxSet(np.zeros(d), np.ones(d), norm, "cube")
    phi = fractional_opt(Instance(d, T, "smooth", cube, f, reqs)).phi
    wit = np.argmax(-(Vs @ phi), axis=1)
    m = Vs[np.arange(T), wit].mean(axis=0)
    S = budget_cap(np.clip(m + slack, 0, 1), norm)
    return Instance(d, T, "smooth", S, f, reqs, None, tuple(int(i) for i in wit))


def generate(kind: str, d: int, T: int, k: int = 3, seed: int = 0, *, budget: float | None = None,
             slack: float = 0.0, norm: NormKind | str = NormKind.MAX_ABS,
             objective: str = "log", beta: float = 1.0, sparsity: float = 0.5,
             tight: bool = False) -> Instance:
    """Seeded random instance of the given kind.

    Constrained kinds are built witness-first: one witness option per step is
    drawn, S is placed relative to the witness average ``m`` and then the
    remaining k - 1 decoys are drawn and shuffled in.

    * feasibility / general: S = [m - slack, m + slack] (clipped to [0, 1]); the
      general kind adds a separable concave objective (``objective`` = log | capped).
    * linear: S = [0, m + slack], an upper cap, and options carry rewards.
    * smooth: quadratic objective with curvature ``beta``; the witness follows
      the gradient at the unconstrained fluid optimum and S = [0, m + slack].
    * covering: S = [m - slack, 1].
    * packing: the zero option sits at index 0, S = [0, B/T], B defaults to T/4.
      ``sparsity`` is the chance that a coordinate of a decoy is zero.

    With ``tight=True`` (feasibility and general kinds) all options are drawn
    uniformly, the witness is a rounded min-max choice and S = [0, m + slack].
    S then touches the reachable averages only near its corner, which is the
    regime where the online distance decays like 1 / sqrt(T).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if d < 1 or T < 1 or k < 1:
        raise ValueError("d, T and k must be at least 1")
    if slack < 0:
        raise ValueError("slack must be non-negative")
    norm = NormKind.parse(norm)
    rng = np.random.default_rng(seed)

    if kind == "packing":
        B = float(T) / 4.0 if budget is None else float(budget)
        if B <= 0:
            raise ValueError("budget must be positive")
        requests = []
        for _ in range(T):
            V = rng.uniform(0.0, 1.0, (k, d)) * (rng.uniform(size=(k, d)) >= sparsity)
            R = rng.uniform(0.0, 1.0, k)
            requests.append(Request(np.vstack([np.zeros(d), V]), np.concatenate([[0.0], R])))
        cap = np.full(d, min(B / T, 1.0))
        return Instance(d, T, kind, budget_cap(cap, norm), LinearReward(d), tuple(requests), B,
                        tuple([0] * T))

    if tight:
        if kind not in ("feasibility", "general"):
            raise ValueError("tight mode applies to feasibility and general kinds")
        Vs = rng.uniform(0.0, 1.0, (T, k, d))
        wit = _minmax_witness(Vs)
        m = Vs[np.arange(T), wit].mean(axis=0)
        S = budget_cap(np.clip(m + slack, 0, 1), norm)
        f = _random_objective(d, rng, objective) if kind == "general" else ZeroObjective(d)
        inst = Instance(d, T, kind, S, f, tuple(Request(V) for V in Vs), None,
                        tuple(int(i) for i in wit))
        if distance(inst.witness_average(), S) > 1e-9:
            raise AssertionError("generator produced an uncertified instance")
        return inst

    if kind == "smooth":
        return _smooth_instance(d, T, k, rng, norm, beta, slack)

    W = rng.uniform(0.0, 1.0, (T, d))
    m = W.mean(axis=0)
    if kind in ("feasibility", "general"):
        S = BoxSet(np.clip(m - slack, 0, 1), np.clip(m + slack, 0, 1), norm, "band")
    elif kind == "linear":
        S = budget_cap(np.clip(m + slack, 0, 1), norm)
    else:
        floor = m - slack
        if np.any(floor > 1):
            raise ValueError("covering floor above 1 is infeasible")
        S = cover_floor(np.clip(floor, 0, 1), norm)

    if kind == "general":
        f: Objective = _random_objective(d, rng, objective)
    elif kind == "linear":
        f = LinearReward(d)
    else:
        f = ZeroObjective(d)

    requests, witness = [], []
    for t in range(T):
        V = rng.uniform(0.0, 1.0, (k, d))
        pos = int(rng.integers(k))
        V[pos] = W[t]
        R = rng.uniform(0.0, 1.0, k) if kind == "linear" else None
        requests.append(Request(V, R))
        witness.append(pos)
    inst = Instance(d, T, kind, S, f, tuple(requests), None, tuple(witness))
    if distance(inst.witness_average(), S) > 1e-9:
        raise AssertionError("generator produced an uncertified instance")
    return inst


# ---------------------------------------------------------------------------
# streams


@dataclass(frozen=True)
class StreamOrder:
    mode: str
    seed: int
    order: np.ndarray

    def requests(self, instance: Instance) -> Iterator[Request]:
        for i in self.order:
            yield instance.requests[int(i)]


def rp_order(instance: Instance, seed: int) -> StreamOrder:
    rng = np.random.default_rng(seed)
    return StreamOrder("rp", seed, rng.permutation(instance.T))


def iid_order(instance: Instance, seed: int, T_out: int | None = None) -> StreamOrder:
    rng = np.random.default_rng(seed)
    n = instance.T if T_out is None else int(T_out)
    p = None
    if instance.iid_weights is not None:
        p = np.asarray(instance.iid_weights, float)
        p = p / p.sum()
    return StreamOrder("iid", seed, rng.choice(instance.T, size=n, replace=True, p=p))


def rp_stream(instance: Instance, seed: int):
    order = rp_order(instance, seed)
    return order, order.requests(instance)


def iid_stream(instance: Instance, seed: int, T_out: int | None = None):
    order = iid_order(instance, seed, T_out)
    return order, order.requests(instance)


def make_order(instance: Instance, mode: str, seed: int, T_out: int | None = None) -> StreamOrder:
    if mode == "rp":
        return rp_order(instance, seed)
    if mode == "iid":
        return iid_order(instance, seed, T_out)
    raise ValueError(f"unknown stream mode {mode!r}")


def realize(instance: Instance, order: StreamOrder) -> Instance:
    """The instance whose request list is the stream in arrival order.

    For IID streams this is the realized sample, whose offline optimum is the
    per-realization benchmark.
    """
    reqs = [instance.requests[int(i)] for i in order.order]
    witness = None
    if instance.witness is not None and order.mode == "rp":
        witness = tuple(instance.witness[int(i)] for i in order.order)
    return instance.with_requests(reqs, witness)
