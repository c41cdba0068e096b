"""Command line front end.

    ostoc gen     --kind packing --d 3 --T 400 --seed 1 --out inst.osp.jsonl
    ostoc run     --instance inst.osp.jsonl --algo packing --seed 7 --out runs/a
    ostoc sweep   --algo feasibility --kind feasibility --T 200 800 3200 --seeds 0-49 --out s.csv
    ostoc verify  [paths ...]
    ostoc report  s.csv [more.csv ...] [--out table.csv]

Every flag can also be given as a key of a JSON file passed with --config;
flags given on the command line win. Exit codes: 0 ok, 1 verification
failure, 2 malformed input, 3 infeasible instance.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import instances as inst_mod
from ..algorithms import ALGORITHMS, RunConfig
from ..instances import KINDS, InstanceFormatError
from . import report as report_mod
from .experiment import (ExperimentSpec, InfeasibleInstance, check_feasible, execute, sweep,
                         write_run, write_sweep_csv)
from .verify import bundled_pack, verify_paths

EXIT_OK, EXIT_VERIFY, EXIT_MALFORMED, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _add_generator_args(p):
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--slack", type=float)
    p.add_argument("--norm", choices=["maxabs", "euclidean"])
    p.add_argument("--objective", choices=["log", "capped"])
    p.add_argument("--beta", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ostoc", description="online stochastic convex programming experiments")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a generated instance")
    g.add_argument("--config")
    _add_generator_args(g)
    g.add_argument("--T", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--budget", type=float)
    g.add_argument("--out")

    r = sub.add_parser("run", help="run one algorithm on one stream")
    r.add_argument("--config")
    r.add_argument("--instance")
    _add_generator_args(r)
    r.add_argument("--T", type=int)
    r.add_argument("--budget", type=float)
    r.add_argument("--instance-seed", type=int, dest="instance_seed")
    r.add_argument("--algo", choices=ALGORITHMS)
    r.add_argument("--seed", type=int)
    r.add_argument("--stream", choices=["rp", "iid"])
    r.add_argument("--T-out", type=int, dest="T_out")
    r.add_argument("--Z", type=float)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--theta-learner", dest="theta_learner", choices=["ogd", "signed_mw"])
    r.add_argument("--q-gap", action="store_true", dest="q_gap", default=None)
    r.add_argument("--out")

    s = sub.add_parser("sweep", help="Monte-Carlo grid over T, B, epsilon and seeds")
    s.add_argument("--config")
    s.add_argument("--algo", choices=ALGORITHMS)
    _add_generator_args(s)
    s.add_argument("--T", type=int, nargs="+")
    s.add_argument("--budget-fraction", type=float, nargs="+", dest="budget_fraction")
    s.add_argument("--epsilon", type=float, nargs="+")
    s.add_argument("--seeds")
    s.add_argument("--stream", choices=["rp", "iid"])
    s.add_argument("--Z", type=float)
    s.add_argument("--instance-seed", type=int, dest="instance_seed")
    s.add_argument("--workers", type=int)
    s.add_argument("--out")

    v = sub.add_parser("verify", help="oracle cross-checks on tiny instances")
    v.add_argument("paths", nargs="*")

    rep = sub.add_parser("report", help="aggregate sweep CSVs")
    rep.add_argument("csv", nargs="+")
    rep.add_argument("--out")
    return ap


def _merged(args, keys) -> dict:
    """JSON config values overlaid by explicitly given flags."""
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(base, dict):
            raise UsageError("config file must hold a JSON object")
    for k in keys:
        val = getattr(args, k, None)
        if val is not None:
            base[k] = val
    return base


def _require(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join(missing))


_GEN_KEYS = ("kind", "d", "k", "slack", "norm", "objective", "beta")


def _generate_from(cfg: dict, seed_key: str):
    _require(cfg, "kind", "d", "T")
    extra = {k: cfg[k] for k in ("slack", "norm", "objective", "beta") if cfg.get(k) is not None}
    return inst_mod.generate(cfg["kind"], int(cfg["d"]), int(cfg["T"]), int(cfg.get("k") or 3),
                             int(cfg.get(seed_key) or 0), budget=cfg.get("budget"), **extra)


def cmd_gen(args) -> int:
    cfg = _merged(args, _GEN_KEYS + ("T", "seed", "budget", "out"))
    _require(cfg, "out")
    inst = _generate_from(cfg, "seed")
    inst_mod.save(inst, cfg["out"])
    print(f"wrote {cfg['out']} ({inst.kind}, d={inst.d}, T={inst.T}, sha256={inst.digest()[:12]})")
    return EXIT_OK


def cmd_run(args) -> int:
    keys = _GEN_KEYS + ("instance", "T", "budget", "instance_seed", "algo", "seed", "stream",
                        "T_out", "Z", "epsilon", "theta_learner", "q_gap", "out")
    cfg = _merged(args, keys)
    _require(cfg, "algo", "out")
    inst = inst_mod.load(cfg["instance"]) if cfg.get("instance") else _generate_from(cfg, "instance_seed")
    check_feasible(inst)
    rc = RunConfig(cfg["algo"], Z=cfg.get("Z"), epsilon=cfg.get("epsilon") or 0.1,
                   theta_learner=cfg.get("theta_learner") or "ogd",
                   stream=cfg.get("stream") or "rp", seed=int(cfg.get("seed") or 0),
                   T_out=cfg.get("T_out"))
    res = execute(inst, rc, with_q_gap=bool(cfg.get("q_gap")))
    tp, sp = write_run(res, cfg["out"])
    m = res.metrics
    print(f"{rc.algorithm}: tau={m.tau} regret1={m.regret1} regret2={m.regret2:.6g} ratio={m.ratio}")
    print(f"wrote {tp} and {sp}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _merged(args, _GEN_KEYS + ("algo", "T", "budget_fraction", "epsilon", "seeds", "stream",
                                     "Z", "instance_seed", "workers", "out"))
    _require(cfg, "algo", "kind", "T", "out")
    seeds = cfg.get("seeds", "0")
    seeds = _seed_list(seeds) if isinstance(seeds, str) else [int(s) for s in seeds]
    spec_args = {"algorithm": cfg["algo"], "kind": cfg["kind"], "T_values": tuple(cfg["T"]),
                 "seeds": tuple(seeds)}
    for src, dst in (("budget_fraction", "budget_fractions"), ("epsilon", "epsilons")):
        if cfg.get(src) is not None:
            spec_args[dst] = tuple(cfg[src])
    for key in ("d", "k", "slack", "norm", "objective", "beta", "stream", "Z", "instance_seed"):
        if cfg.get(key) is not None:
            spec_args[key] = cfg[key]
    spec = ExperimentSpec.from_dict(spec_args)
    rows = sweep(spec, cfg.get("workers"))
    write_sweep_csv(rows, cfg["out"])
    print(f"wrote {len(rows)} rows to {cfg['out']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    paths = [Path(p) for p in args.paths] or bundled_pack()
    checks = verify_paths(paths)
    bad = [c for c in checks if not c.ok]
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.instance:28s} {c.name:28s} {c.detail}")
    print(f"{len(checks) - len(bad)}/{len(checks)} checks passed")
    return EXIT_VERIFY if bad else EXIT_OK


def cmd_report(args) -> int:
    rows = report_mod.read_rows(args.csv)
    table = report_mod.aggregate(rows)
    fits = report_mod.slopes(table)
    sys.stdout.write(report_mod.format_table(table))
    sys.stdout.write("\n")
    sys.stdout.write(report_mod.format_table(fits))
    if args.out:
        report_mod.write_records(table, args.out)
        stem = Path(args.out)
        report_mod.write_records(fits, stem.with_name(stem.stem + "_slopes" + stem.suffix))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify,
            "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ostoc: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except InfeasibleInstance as exc:
        print(f"ostoc: infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InstanceFormatError, ValueError, KeyError, OSError) as exc:
        print(f"ostoc: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
