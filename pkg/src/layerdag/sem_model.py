"""Ground-truth linear SEMs: DAGs, topological layers, generators and simulation.

Nodes are 0-based integers ``0..p-1``. An edge ``(j, k)`` means ``j -> k``
and its weight lives at ``B[k, j]``, so that ``x = B x + eps``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from graphlib import CycleError as _GraphlibCycleError
from graphlib import TopologicalSorter
from typing import Iterable, Sequence

import numpy as np

from .exceptions import CycleError, InvalidParameterError, SingularMatrixError
from .precision import PrecisionEstimate

__all__ = [
    "Dag",
    "NoiseSpec",
    "SemModel",
    "LayerDecomposition",
    "Dataset",
    "layer_decompose",
    "generate_hub",
    "generate_ba",
    "sample_coefficients",
    "make_noise",
    "make_model",
    "simulate",
    "total_effects",
    "population_covariance",
    "population_precision",
    "NOISE_KINDS",
    "toy_model",
]


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on nodes ``0..p-1``."""

    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.p < 0:
            raise InvalidParameterError(f"p must be >= 0, got {self.p}")
        edges = frozenset((int(j), int(k)) for j, k in self.edges)
        for j, k in edges:
            if not (0 <= j < self.p and 0 <= k < self.p):
                raise InvalidParameterError(f"edge {j}->{k} outside nodes 0..{self.p - 1}")
            if j == k:
                raise CycleError([j, j])
        object.__setattr__(self, "edges", edges)
        self.topological_order()

    def parents(self, k: int) -> set[int]:
        return {j for j, c in self.edges if c == k}

    def children(self, j: int) -> set[int]:
        return {c for pa, c in self.edges if pa == j}

    def topological_order(self) -> list[int]:
        """Parents before children; ties broken by node label."""
        ts = TopologicalSorter({k: () for k in range(self.p)})
        for j, k in sorted(self.edges):
            ts.add(k, j)
        try:
            ts.prepare()
        except _GraphlibCycleError as exc:
            cyc = list(exc.args[1])
            if not all((a, b) in self.edges for a, b in zip(cyc, cyc[1:])):
                cyc.reverse()
            raise CycleError(cyc) from None
        order = []
        while ts.is_active():
            ready = sorted(ts.get_ready())
            order.extend(ready)
            ts.done(*ready)
        return order

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``A[j, k]`` true iff ``j -> k``."""
        a = np.zeros((self.p, self.p), dtype=bool)
        for j, k in self.edges:
            a[j, k] = True
        return a

    @classmethod
    def from_weights(cls, B: np.ndarray, tol: float = 0.0) -> "Dag":
        B = np.asarray(B)
        ks, js = np.nonzero(np.abs(B) > tol)
        return cls(B.shape[0], frozenset(zip(js.tolist(), ks.tolist())))


@dataclass(frozen=True)
class LayerDecomposition:
    """Ordered partition ``A_0, ..., A_{T-1}``; ``A_0`` holds sinks and isolated nodes."""

    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(frozenset(a) for a in self.layers))

    @property
    def T(self) -> int:
        return len(self.layers)

    def layer_of(self) -> dict[int, int]:
        return {k: t for t, a in enumerate(self.layers) for k in a}

    def as_lists(self) -> list[list[int]]:
        return [sorted(a) for a in self.layers]

    def __eq__(self, other):
        if isinstance(other, LayerDecomposition):
            return self.layers == other.layers
        return self.layers == tuple(frozenset(a) for a in other)

    def __hash__(self):
        return hash(self.layers)


def layer_decompose(dag: Dag) -> LayerDecomposition:
    """Assign every node its longest directed distance to a sink."""
    order = dag.topological_order()
    children = {k: [] for k in range(dag.p)}
    for j, k in dag.edges:
        children[j].append(k)
    depth = {}
    for k in reversed(order):
        depth[k] = 1 + max((depth[c] for c in children[k]), default=-1)
    T = 1 + max(depth.values(), default=-1)
    layers = [set() for _ in range(T)]
    for k, d in depth.items():
        layers[d].add(k)
    return LayerDecomposition(tuple(layers))


# ----------------------------------------------------------------------------
# noise laws

_LAWS = ("uniform", "t", "laplace", "scaled_uniform")


@dataclass(frozen=True)
class NoiseSpec:
    """A continuous non-Gaussian noise law.

    ``uniform``: params ``(a, b)``; ``t``: ``(df,)`` with df > 2;
    ``laplace``: ``(loc, scale)``; ``scaled_uniform``: ``(sigma,)`` meaning
    ``sigma * Uniform[-3, 3]``.
    """

    law: str
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        law, prm = self.law, self.params
        if law == "uniform":
            ok = len(prm) == 2 and prm[0] < prm[1]
        elif law == "t":
            ok = len(prm) == 1 and prm[0] > 2
        elif law == "laplace":
            ok = len(prm) == 2 and prm[1] > 0
        elif law == "scaled_uniform":
            ok = len(prm) == 1 and prm[0] > 0
        else:
            raise InvalidParameterError(f"unknown noise law {law!r}; expected one of {_LAWS}")
        if not ok:
            raise InvalidParameterError(f"invalid parameters {prm} for noise law {law!r}")

    @property
    def mean(self) -> float:
        if self.law == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        if self.law == "laplace":
            return self.params[0]
        return 0.0

    @property
    def variance(self) -> float:
        prm = self.params
        if self.law == "uniform":
            return (prm[1] - prm[0]) ** 2 / 12.0
        if self.law == "t":
            return prm[0] / (prm[0] - 2.0)
        if self.law == "laplace":
            return 2.0 * prm[1] ** 2
        return 3.0 * prm[0] ** 2

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        prm = self.params
        if self.law == "uniform":
            return rng.uniform(prm[0], prm[1], size=n)
        if self.law == "t":
            return rng.standard_t(prm[0], size=n)
        if self.law == "laplace":
            return rng.laplace(prm[0], prm[1], size=n)
        return prm[0] * rng.uniform(-3.0, 3.0, size=n)

    def to_dict(self) -> dict:
        return {"law": self.law, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(d["law"], tuple(d.get("params", ())))


UNIFORM = NoiseSpec("uniform", (-3.0, 3.0))
STUDENT_T = NoiseSpec("t", (9.0,))
LAPLACE = NoiseSpec("laplace", (0.0, float(np.sqrt(1.5))))

#: Noise tags understood by :func:`make_noise`.
NOISE_KINDS = ("uniform", "t", "laplace", "scaled_uniform", "mixed")


def make_noise(kind: str, p: int, seed=None) -> tuple:
    """Per-node noise specs for one of the benchmark noise tags.

    ``mixed`` draws each node's law uniformly from the three fixed laws;
    ``scaled_uniform`` draws ``sigma ~ Uniform[0.2, 1]`` per node.
    """
    if kind == "uniform":
        return (UNIFORM,) * p
    if kind == "t":
        return (STUDENT_T,) * p
    if kind == "laplace":
        return (LAPLACE,) * p
    rng = np.random.default_rng(seed)
    if kind == "scaled_uniform":
        return tuple(NoiseSpec("scaled_uniform", (s,)) for s in rng.uniform(0.2, 1.0, size=p))
    if kind == "mixed":
        laws = (UNIFORM, STUDENT_T, LAPLACE)
        return tuple(laws[i] for i in rng.integers(0, 3, size=p))
    raise InvalidParameterError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")


# ----------------------------------------------------------------------------
# models and data


@dataclass(frozen=True, eq=False)
class SemModel:
    dag: Dag
    B: np.ndarray
    noise: tuple

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        p = self.dag.p
        if B.shape != (p, p):
            raise InvalidParameterError(f"B has shape {B.shape}, expected {(p, p)}")
        support = B != 0
        if not np.array_equal(support, self.dag.adjacency().T):
            raise InvalidParameterError("support of B does not match the DAG's edge set")
        noise = tuple(self.noise)
        if len(noise) != p:
            raise InvalidParameterError(f"expected {p} noise specs, got {len(noise)}")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "noise", noise)

    @property
    def p(self) -> int:
        return self.dag.p

    @property
    def noise_variances(self) -> np.ndarray:
        return np.array([nz.variance for nz in self.noise])

    @classmethod
    def from_weights(cls, B, noise) -> "SemModel":
        B = np.asarray(B, dtype=float)
        if isinstance(noise, NoiseSpec):
            noise = (noise,) * B.shape[0]
        return cls(Dag.from_weights(B), B, tuple(noise))

    def to_dict(self) -> dict:
        edges = [[j, k, float(self.B[k, j])] for j, k in sorted(self.dag.edges)]
        return {"p": self.p, "edges": edges, "noise": [nz.to_dict() for nz in self.noise]}

    @classmethod
    def from_dict(cls, d: dict) -> "SemModel":
        p = int(d["p"])
        B = np.zeros((p, p))
        for j, k, beta in d["edges"]:
            B[int(k), int(j)] = float(beta)
        dag = Dag(p, frozenset((int(j), int(k)) for j, k, _ in d["edges"]))
        noise = tuple(NoiseSpec.from_dict(nd) for nd in d["noise"])
        return cls(dag, B, noise)


@dataclass(frozen=True, eq=False)
class Dataset:
    """``X`` is ``n x p``, rows are observations."""

    X: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise InvalidParameterError("X must be two-dimensional")
        labels = tuple(self.labels) if self.labels else tuple(f"x{k + 1}" for k in range(X.shape[1]))
        if len(labels) != X.shape[1]:
            raise InvalidParameterError(
                f"{len(labels)} labels for {X.shape[1]} columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def generate_hub(p: int) -> Dag:
    """Node 0 is the parent of every other node."""
    if p < 2:
        raise InvalidParameterError(f"hub graph needs p >= 2, got {p}")
    return Dag(p, frozenset((0, k) for k in range(1, p)))


def generate_ba(p: int, m_edges: int = 2, seed=None) -> Dag:
    """Directed Barabasi-Albert graph grown one node at a time.

    Node ``v`` receives ``min(m_edges, v)`` edges from distinct earlier nodes,
    drawn without replacement with probability proportional to
    ``1 + degree`` (in- plus out-degree).
    """
    if p < 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    if m_edges < 1:
        raise InvalidParameterError(f"m_edges must be >= 1, got {m_edges}")
    rng = np.random.default_rng(seed)
    degree = np.zeros(p)
    edges = []
    for v in range(1, p):
        m = min(m_edges, v)
        w = 1.0 + degree[:v]
        if m == v:
            chosen = np.arange(v)
        else:
            chosen = rng.choice(v, size=m, replace=False, p=w / w.sum())
        for j in sorted(int(c) for c in chosen):
            edges.append((j, v))
            degree[j] += 1
        degree[v] += m
    return Dag(p, frozenset(edges))


def sample_coefficients(dag: Dag, lo: float = 0.5, hi: float = 1.5, seed=None) -> np.ndarray:
    """Edge weights uniform on ``[-hi, -lo] U [lo, hi]``, returned as ``B``."""
    if not (0 < lo < hi):
        raise InvalidParameterError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    rng = np.random.default_rng(seed)
    B = np.zeros((dag.p, dag.p))
    for j, k in sorted(dag.edges):
        mag = rng.uniform(lo, hi)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        B[k, j] = sign * mag
    return B


def make_model(dag: Dag, noise="uniform", lo: float = 0.5, hi: float = 1.5, seed=None) -> SemModel:
    """Random weights plus noise on a fixed DAG; ``noise`` is a tag or a spec sequence."""
    ss = np.random.SeedSequence(seed)
    coef_seed, noise_seed = ss.spawn(2)
    B = sample_coefficients(dag, lo, hi, seed=coef_seed)
    if isinstance(noise, str):
        noise = make_noise(noise, dag.p, seed=noise_seed)
    elif isinstance(noise, NoiseSpec):
        noise = (noise,) * dag.p
    return SemModel(dag, B, tuple(noise))


def total_effects(model: SemModel) -> np.ndarray:
    """``A = (I - B)^{-1}`` by substitution in topological order.

    Exact zeros are preserved for every pair without a directed path.
    """
    p = model.p
    B = model.B
    A = np.zeros((p, p))
    for k in model.dag.topological_order():
        A[k, k] = 1.0
        for j in np.flatnonzero(B[k]):
            A[k] += B[k, j] * A[j]
    return A


def simulate(model: SemModel, n: int, seed=None, labels: Sequence[str] = ()) -> Dataset:
    """Draw ``n`` observations ``x = (I - B)^{-1} eps``; columns are not centered.

    Each node's noise column comes from its own child stream of ``seed``.
    """
    if n < 0:
        raise InvalidParameterError(f"n must be >= 0, got {n}")
    p = model.p
    streams = np.random.SeedSequence(seed).spawn(p)
    eps = np.empty((n, p))
    for k, (nz, ss) in enumerate(zip(model.noise, streams)):
        eps[:, k] = nz.sample(np.random.default_rng(ss), n)
    IB = np.eye(p) - model.B
    if p and abs(np.linalg.det(IB)) < 1e-300:
        raise SingularMatrixError("I - B is singular")
    X = np.linalg.solve(IB, eps.T).T if n else np.empty((0, p))
    return Dataset(X, tuple(labels))


def population_covariance(model: SemModel) -> np.ndarray:
    A = total_effects(model)
    return A @ np.diag(model.noise_variances) @ A.T


def population_precision(model: SemModel) -> PrecisionEstimate:
    """Closed form ``(I - B)^T Omega^{-1} (I - B)``."""
    IB = np.eye(model.p) - model.B
    theta = IB.T @ np.diag(1.0 / model.noise_variances) @ IB
    theta = 0.5 * (theta + theta.T)  # exact symmetry despite round-off
    return PrecisionEstimate(theta, 0.0, tuple(range(model.p)))


def toy_model(b21: float = 1.0, b31: float = -1.0, b32: float = 1.0,
              noise: NoiseSpec | Iterable = UNIFORM) -> SemModel:
    """Four-node model with ``0 -> 1 -> 2``, ``0 -> 2`` and node 3 isolated.

    The defaults cancel the total effect of node 0 on node 2.
    """
    B = np.zeros((4, 4))
    B[1, 0] = b21
    B[2, 0] = b31
    B[2, 1] = b32
    return SemModel.from_weights(B, noise)
