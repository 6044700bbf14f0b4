"""Edge-recovery and coefficient metrics for an estimated DAG against the truth."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .exceptions import InvalidParameterError
from .sem_model import Dag

__all__ = ["Confusion", "MetricsReport", "edge_confusion", "shd", "compute_metrics"]


@dataclass(frozen=True)
class Confusion:
    """Counts over ordered node pairs ``(j, k)``, ``j != k``."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __iter__(self):
        return iter(astuple(self))


@dataclass(frozen=True)
class MetricsReport:
    """``tpr`` and ``rel_fnorm`` are None when the true graph has no edges."""

    tpr: float | None
    fdr: float
    mcc: float
    shd_normalized: float
    rel_fnorm: float | None
    confusion: Confusion

    def values(self) -> dict:
        return {"tpr": self.tpr, "fdr": self.fdr, "mcc": self.mcc,
                "shd": self.shd_normalized, "rel_fnorm": self.rel_fnorm}

    def csv_row(self) -> dict:
        row = {k: ("NA" if v is None else f"{v:.6g}") for k, v in self.values().items()}
        row.update(zip(("tp", "fp", "tn", "fn"), map(str, self.confusion)))
        return row

    def table(self) -> str:
        lines = [f"{'metric':<10}{'value':>12}"]
        for k, v in self.values().items():
            lines.append(f"{k:<10}{'NA' if v is None else format(v, '.4f'):>12}")
        lines.append("TP={} FP={} TN={} FN={}".format(*self.confusion))
        return "\n".join(lines)


def _adjacency(g, tol: float = 0.0) -> np.ndarray:
    # boolean A[j, k] = j -> k from a Dag, a learned/true model, or a weight matrix B[k, j]
    if isinstance(g, Dag):
        return g.adjacency()
    for attr in ("B_hat", "B"):
        if hasattr(g, attr):
            g = getattr(g, attr)
            break
    W = np.asarray(g, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InvalidParameterError("expected a square weight matrix")
    return (np.abs(W) > tol).T


def _weights(g) -> np.ndarray:
    for attr in ("B_hat", "B"):
        if hasattr(g, attr):
            return np.asarray(getattr(g, attr), dtype=float)
    if isinstance(g, Dag):
        raise InvalidParameterError("a Dag carries no weights")
    return np.asarray(g, dtype=float)


def edge_confusion(est, truth) -> Confusion:
    """Directed-edge confusion counts; a reversed edge is one FP and one FN."""
    E, T = _adjacency(est), _adjacency(truth)
    if E.shape != T.shape:
        raise InvalidParameterError(f"node counts differ: {E.shape[0]} vs {T.shape[0]}")
    p = E.shape[0]
    off = ~np.eye(p, dtype=bool)
    tp = int(np.count_nonzero(E & T & off))
    fp = int(np.count_nonzero(E & ~T & off))
    fn = int(np.count_nonzero(~E & T & off))
    tn = p * (p - 1) - tp - fp - fn
    return Confusion(tp, fp, tn, fn)


def shd(est, truth) -> int:
    """Insertions + deletions + flips, counting each unordered pair at most once."""
    E, T = _adjacency(est), _adjacency(truth)
    if E.shape != T.shape:
        raise InvalidParameterError(f"node counts differ: {E.shape[0]} vs {T.shape[0]}")
    iu = np.triu_indices(E.shape[0], k=1)
    # state of pair (j, k), j < k: bit 0 = j -> k, bit 1 = k -> j
    se = E[iu] + 2 * E.T[iu]
    st = T[iu] + 2 * T.T[iu]
    return int(np.count_nonzero(se != st))


def _mcc(c: Confusion) -> float:
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if den == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den)


def compute_metrics(est, truth) -> MetricsReport:
    """TPR, FDR, MCC, normalised SHD and relative Frobenius error of ``est``.

    ``est`` and ``truth`` may be weight matrices (``B[k, j]`` for ``j -> k``)
    or objects exposing ``B_hat`` / ``B``.
    """
    c = edge_confusion(est, truth)
    p = _adjacency(truth).shape[0]
    tpr = c.tp / (c.tp + c.fn) if c.tp + c.fn else None
    fdr = c.fp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    pairs = p * (p - 1) / 2
    shd_norm = shd(est, truth) / pairs if pairs else 0.0
    Bt = _weights(truth)
    norm = np.linalg.norm(Bt)
    rel = float(np.linalg.norm(_weights(est) - Bt) / norm) if norm > 0 else None
    return MetricsReport(tpr, fdr, _mcc(c), shd_norm, rel, c)
