"""Oracle cross-checks over a pack of tiny instances."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .. import instances as inst_mod
from ..convex_sets import distance
from ..offline_oracles import brute_force_opt, fractional_opt, packing_opt_sum

# (file stem, kind, d, T, k, seed, extra generator arguments)
TINY_PACK = [
    ("feas_maxabs", "feasibility", 2, 6, 2, 11, {"slack": 0.05}),
    ("feas_euclid", "feasibility", 2, 5, 3, 12, {"slack": 0.05, "norm": "euclidean"}),
    ("general_log", "general", 2, 6, 2, 13, {"objective": "log", "slack": 0.05}),
    ("general_capped", "general", 2, 7, 2, 14, {"objective": "capped", "slack": 0.02}),
    ("general_euclid", "general", 3, 5, 2, 15, {"objective": "log", "norm": "euclidean", "slack": 0.05}),
    ("linear_cap", "linear", 2, 6, 3, 16, {}),
    ("covering", "covering", 2, 6, 2, 17, {"slack": 0.05}),
    ("smooth_quad", "smooth", 2, 6, 2, 18, {"norm": "euclidean"}),
    ("packing_d1", "packing", 1, 8, 1, 19, {"budget": 2.0}),
    ("packing_d2", "packing", 2, 8, 2, 20, {"budget": 2.0}),
    ("packing_d3", "packing", 3, 6, 2, 21, {"budget": 1.5}),
]


def build_tiny_pack(out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, kind, d, T, k, seed, extra in TINY_PACK:
        inst = inst_mod.generate(kind, d, T, k, seed, **extra)
        p = out / f"{stem}.osp.jsonl"
        inst_mod.save(inst, p)
        paths.append(p)
    return paths


def bundled_pack() -> list[Path]:
    root = resources.files("ostoc") / "data" / "tiny_pack"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".osp.jsonl"))


@dataclass
class Check:
    name: str
    instance: str
    ok: bool
    detail: str


def check_instance(name: str, inst) -> list[Check]:
    out = []
    bf = brute_force_opt(inst, 0.0)
    bf_rev = brute_force_opt(inst, 0.0, reverse=True)
    same = (bf.feasible == bf_rev.feasible) and (not bf.feasible or abs(bf.value - bf_rev.value) <= 1e-12)
    out.append(Check("brute_force_order", name, same, f"{bf.value} vs {bf_rev.value}"))
    for delta in (0.0, 0.1):
        b = brute_force_opt(inst, delta)
        fr = fractional_opt(inst, delta)
        ok = (not b.feasible) or (fr.feasible and fr.value >= b.value - 1e-6)
        out.append(Check(f"fractional_dominates@{delta}", name, ok,
                         f"fractional {fr.value:.9g} brute {b.value:.9g}"))
    if inst.witness is not None and inst.kind != "packing":
        dist = distance(inst.witness_average(), inst.set_spec)
        out.append(Check("witness_feasible", name, dist <= 1e-9, f"distance {dist:.3g}"))
    if inst.kind == "packing":
        ps = packing_opt_sum(inst).value
        fr = fractional_opt(inst, 0.0).value * inst.T
        out.append(Check("packing_agreement", name, abs(ps - fr) <= 1e-3, f"{ps:.9g} vs {fr:.9g}"))
    return out


def verify_paths(paths) -> list[Check]:
    checks = []
    for p in paths:
        inst = inst_mod.load(p)
        if inst.T > 8:
            continue
        checks.extend(check_instance(Path(p).name, inst))
    return checks
