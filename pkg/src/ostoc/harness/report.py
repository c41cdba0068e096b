"""Aggregate sweep CSVs into mean/stderr tables and log-log slopes."""
from __future__ import annotations

import csv
import math
from collections import defaultdict

import numpy as np

METRICS = ("regret1", "regret2", "ratio", "tau")
GROUP_KEYS = ("algo", "kind", "d", "B_over_T", "epsilon", "stream")


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x); needs positive values."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def _num(s):
    if s in ("", None):
        return None
    return float(s)


def read_rows(paths) -> list[dict]:
    rows = []
    for p in paths:
        with open(p, newline="") as fh:
            for r in csv.DictReader(fh):
                T = int(float(r["T"]))
                B = _num(r.get("B"))
                rows.append({
                    "algo": r["algo"], "kind": r.get("kind", ""), "d": r.get("d", ""),
                    "B_over_T": "" if B is None else f"{B / T:.6g}",
                    "epsilon": r.get("epsilon", ""), "stream": r.get("stream", ""),
                    "T": T, "seed": int(float(r["seed"])),
                    **{m: _num(r.get(m)) for m in METRICS},
                })
    return rows


def aggregate(rows) -> list[dict]:
    """One record per (config, T) with mean and stderr of every metric."""
    groups = defaultdict(list)
    for r in rows:
        groups[tuple(r[k] for k in GROUP_KEYS) + (r["T"],)].append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k[:-1]) + (k[-1],)):
        rs = groups[key]
        rec = dict(zip(GROUP_KEYS + ("T",), key))
        rec["n"] = len(rs)
        for m in METRICS:
            rec[f"{m}_mean"], rec[f"{m}_se"] = mean_stderr(r[m] for r in rs)
        out.append(rec)
    return out


def slopes(table) -> list[dict]:
    """Log-log slope of each mean metric against T within every config."""
    by_cfg = defaultdict(list)
    for rec in table:
        by_cfg[tuple(rec[k] for k in GROUP_KEYS)].append(rec)
    out = []
    for cfg, recs in by_cfg.items():
        recs = sorted(recs, key=lambda r: r["T"])
        row = dict(zip(GROUP_KEYS, cfg))
        for m in ("regret1", "regret2"):
            row[f"{m}_slope"] = fit_loglog_slope([r["T"] for r in recs], [r[f"{m}_mean"] for r in recs])
        out.append(row)
    return out


def format_table(records) -> str:
    if not records:
        return "(no rows)\n"
    cols = list(records[0].keys())

    def cell(v):
        if isinstance(v, float):
            return "nan" if math.isnan(v) else f"{v:.6g}"
        return str(v)

    lines = ["\t".join(cols)]
    lines += ["\t".join(cell(r[c]) for c in cols) for r in records]
    return "\n".join(lines) + "\n"


def write_records(records, path) -> None:
    if not records:
        open(path, "w").close()
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(records[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(records)
