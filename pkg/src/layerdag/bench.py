"""Replicated simulation benchmarks on hub and BA graphs."""
from __future__ import annotations

import csv
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import InvalidParameterError, LayerDagError
from .learner import LearnConfig, learn
from .metrics import compute_metrics
from .sem_model import NOISE_KINDS, generate_ba, generate_hub, make_model, simulate

__all__ = ["BenchSpec", "BenchWarning", "run_replicate", "run_bench", "summarize", "write_bench"]

METRICS = ("tpr", "fdr", "mcc", "shd", "rel_fnorm")


class BenchWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BenchSpec:
    example: str = "hub"
    n: int = 200
    p: int = 50
    noise: str = "uniform"
    replicates: int = 10
    cfg: LearnConfig = field(default_factory=LearnConfig)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.example not in ("hub", "ba"):
            raise InvalidParameterError(f"example must be 'hub' or 'ba', got {self.example!r}")
        if self.noise not in NOISE_KINDS:
            raise InvalidParameterError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.n < 2:
            raise InvalidParameterError(f"n must be >= 2, got {self.n}")
        if self.p < (2 if self.example == "hub" else 1):
            raise InvalidParameterError(f"p={self.p} is too small for a {self.example} graph")
        if self.replicates < 1:
            raise InvalidParameterError(f"replicates must be >= 1, got {self.replicates}")
        if self.jobs < 1:
            raise InvalidParameterError(f"jobs must be >= 1, got {self.jobs}")


def run_replicate(spec: BenchSpec, i: int) -> dict:
    """One replicate with seed ``spec.seed + i`` for graph, weights, noise, data and tests."""
    seed = spec.seed + i
    t0 = time.perf_counter()
    row = {"replicate": i, "seed": seed}
    try:
        dag = generate_hub(spec.p) if spec.example == "hub" else generate_ba(spec.p, 2, seed=seed)
        model = make_model(dag, spec.noise, seed=seed)
        data = simulate(model, spec.n, seed=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            learned = learn(data, replace(spec.cfg, seed=seed))
        report = compute_metrics(learned, model)
    except (LayerDagError, ArithmeticError, ValueError) as exc:
        row.update(status=f"failed: {type(exc).__name__}: {exc}", seconds=time.perf_counter() - t0)
        return row
    row.update(report.values())
    row.update(zip(("tp", "fp", "tn", "fn"), report.confusion))
    row.update(T=learned.T, status="ok", seconds=time.perf_counter() - t0)
    return row


def run_bench(spec: BenchSpec) -> list[dict]:
    """All replicates, ordered by replicate index."""
    idx = range(spec.replicates)
    if spec.jobs == 1:
        rows = [run_replicate(spec, i) for i in idx]
    else:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            rows = list(pool.map(run_replicate, [spec] * spec.replicates, idx))
    for r in rows:
        if r["status"] != "ok":
            warnings.warn(f"replicate {r['replicate']} excluded ({r['status']})", BenchWarning, stacklevel=2)
    return sorted(rows, key=lambda r: r["replicate"])


def summarize(rows: list[dict]) -> dict:
    """Mean and standard error of each metric over the successful replicates.

    The standard error is None when fewer than two values are available.
    """
    ok = [r for r in rows if r["status"] == "ok"]
    out = {"completed": len(ok), "failed": len(rows) - len(ok)}
    for m in METRICS + ("seconds",):
        vals = np.array([r[m] for r in ok if r.get(m) is not None], dtype=float)
        out[f"{m}_mean"] = float(vals.mean()) if vals.size else None
        out[f"{m}_se"] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else None
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_bench(spec: BenchSpec, rows: list[dict], out_dir) -> dict[str, Path]:
    """Write ``summary.csv``, ``replicates.csv`` and ``timing.csv`` into ``out_dir``.

    Wall-clock times live only in ``timing.csv`` so the other two files are
    reproducible byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(rows)
    head = {"example": spec.example, "n": spec.n, "p": spec.p, "noise": spec.noise,
            "replicates": spec.replicates, "completed": summary["completed"]}
    cols = [f"{m}_{s}" for m in METRICS for s in ("mean", "se")]
    paths = {k: out / f"{k}.csv" for k in ("summary", "replicates", "timing")}
    with paths["summary"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(head) + cols)
        w.writerow([_fmt(v) for v in head.values()] + [_fmt(summary[c]) for c in cols])
    rep_cols = ["replicate", "seed", *METRICS, "tp", "fp", "tn", "fn", "T", "status"]
    with paths["replicates"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rep_cols)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in rep_cols])
    with paths["timing"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "seconds"])
        for r in rows:
            w.writerow([r["replicate"], f"{r['seconds']:.3f}"])
    return paths
