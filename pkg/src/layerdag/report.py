"""Summaries of a learned graph: hub nodes by child count and the strongest edges."""
from __future__ import annotations

from .learner import LearnedDag

__all__ = ["hub_table", "top_edges", "format_table"]


def _names(learned: LearnedDag) -> list[str]:
    return list(learned.labels) if learned.labels else [str(k) for k in range(learned.p)]


def hub_table(learned: LearnedDag, top: int | None = None) -> list[tuple[int, str, int]]:
    """``(node, label, n_children)`` for nodes with children, most children first.

    Ties are broken by ascending node index.
    """
    names = _names(learned)
    counts = {}
    for j, _, _ in learned.edges():
        counts[j] = counts.get(j, 0) + 1
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if top is not None:
        rows = rows[:top]
    return [(j, names[j], c) for j, c in rows]


def top_edges(learned: LearnedDag, k: int = 30) -> list[tuple[str, str, float]]:
    """The ``k`` edges with largest ``|weight|`` as ``(parent, child, weight)``."""
    names = _names(learned)
    edges = sorted(learned.edges(), key=lambda e: (-abs(e[2]), e[0], e[1]))[:k]
    return [(names[j], names[c], w) for j, c, w in edges]


def format_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[f"{v:.4f}" if isinstance(v, float) else str(v) for v in r]
                                       for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells)
