"""Bottom-up recovery of topological layers, parents and edge weights.

Each round works on the nodes not yet assigned (the scope). It estimates
the precision matrix of the scope, regresses every node on the rest of the
scope through that matrix, and collects the nodes whose residual is
independent of every other node in scope: these form the lowest remaining
layer. Their parents are the remaining nodes with a nonzero precision entry,
and the weight of ``k -> l`` is ``-theta_lk / theta_ll``. The loop stops
once at most one node is left.

Cost per round is one graphical-lasso solve on the scope (cubic in its
size) plus ``|scope| * (|scope| - 1)`` permutation tests of ``n`` samples.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .exceptions import InsufficientDataError, InvalidParameterError, InvalidPrecisionError
from .indep import all_independent
from .precision import (
    PrecisionEstimate,
    empirical_covariance,
    glasso,
    lambda_schedule,
    refit_on_support,
    residual,
)
from .sem_model import Dag, Dataset, LayerDecomposition, SemModel, population_covariance, total_effects

__all__ = [
    "LearnConfig",
    "LearnedDag",
    "RoundDiagnostics",
    "identify_layer",
    "extract_parents",
    "learn",
    "learn_population",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnConfig:
    alpha: float = 0.01
    c_lambda: float = 0.5
    n_perm: int = 199
    zero_tol: float = 1e-8
    seed: int = 0
    max_layers: int | None = None
    bonferroni: bool = False
    glasso_tol: float = 1e-6
    glasso_max_iter: int = 500
    refit: bool = False
    standardize: bool = True
    stop_after: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.c_lambda <= 0:
            raise InvalidParameterError(f"c_lambda must be positive, got {self.c_lambda}")
        if self.n_perm < 1:
            raise InvalidParameterError(f"n_perm must be >= 1, got {self.n_perm}")
        if self.zero_tol < 0:
            raise InvalidParameterError(f"zero_tol must be >= 0, got {self.zero_tol}")
        if self.max_layers is not None and self.max_layers < 1:
            raise InvalidParameterError(f"max_layers must be >= 1, got {self.max_layers}")
        if self.stop_after is not None and self.stop_after < 1:
            raise InvalidParameterError(f"stop_after must be >= 1, got {self.stop_after}")


@dataclass
class RoundDiagnostics:
    t: int
    scope: list
    layer: list
    lam: float
    converged: bool
    kkt: float
    fallback: bool = False
    # (node, partner) -> p-value for every test that was run
    pvalues: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pvalues"] = [[l, k, p] for (l, k), p in sorted(self.pvalues.items())]
        return d


@dataclass(eq=False)
class LearnedDag:
    layers: LayerDecomposition
    B_hat: np.ndarray
    labels: tuple = ()
    diagnostics: list = field(default_factory=list)

    @property
    def p(self) -> int:
        return self.B_hat.shape[0]

    @property
    def T(self) -> int:
        return self.layers.T

    def parents(self, l: int) -> set[int]:
        return set(np.flatnonzero(self.B_hat[l]).tolist())

    def edges(self) -> list[tuple[int, int, float]]:
        """``(parent, child, weight)`` triples in label order."""
        ks, js = np.nonzero(self.B_hat)
        return sorted((int(j), int(k), float(self.B_hat[k, j])) for k, j in zip(ks, js))

    def dag(self) -> Dag:
        return Dag.from_weights(self.B_hat)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "labels": list(self.labels),
            "layers": self.layers.as_lists(),
            "edges": [list(e) for e in self.edges()],
            "T": self.T,
            "diagnostics": [d.to_dict() if hasattr(d, "to_dict") else d for d in self.diagnostics],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LearnedDag":
        layers = LayerDecomposition(tuple(d["layers"]))
        p = int(d.get("p", sum(len(a) for a in d["layers"])))
        B = np.zeros((p, p))
        for j, k, beta in d["edges"]:
            B[int(k), int(j)] = float(beta)
        return cls(layers, B, tuple(d.get("labels", ())), list(d.get("diagnostics", [])))


def extract_parents(theta: PrecisionEstimate, layer, upper, zero_tol: float = 1e-8):
    """Parents and weights for the nodes of ``layer`` read off ``theta``.

    Returns ``{l: {k: beta_lk}}`` with ``k`` ranging over nodes of ``upper``
    whose entry exceeds ``zero_tol`` in magnitude.
    """
    layer, upper = set(layer), set(upper)
    if layer & upper or (layer | upper) != set(theta.labels):
        raise InvalidParameterError("layer and upper must partition the precision matrix's nodes")
    t = theta.theta
    out = {}
    for l in sorted(layer):
        i = theta.index(l)
        if t[i, i] <= 0:
            raise InvalidPrecisionError(f"non-positive diagonal entry for node {l}")
        coefs = {}
        for k in sorted(upper):
            v = t[i, theta.index(k)]
            if abs(v) > zero_tol:
                coefs[k] = -v / t[i, i]
        out[l] = coefs
    return out


def _estimate_precision(S: np.ndarray, lam: float, cfg: LearnConfig, scope) -> PrecisionEstimate:
    if not cfg.standardize:
        return glasso(S, lam, cfg.glasso_tol, cfg.glasso_max_iter, labels=scope)
    # penalise on the correlation scale, then map back: theta = D^-1/2 theta_R D^-1/2
    d = np.sqrt(np.diag(S))
    if np.any(d == 0):
        bad = scope[int(np.flatnonzero(d == 0)[0])]
        raise InsufficientDataError(f"column {bad} is constant")
    est = glasso(S / np.outer(d, d), lam, cfg.glasso_tol, cfg.glasso_max_iter, labels=scope)
    est.theta = est.theta / np.outer(d, d)
    return est


def identify_layer(X: np.ndarray, scope, cfg: LearnConfig, t: int = 0):
    """Lowest layer among ``scope`` from centered data ``X`` (columns = nodes).

    Returns ``(layer, theta, diagnostics)``. If no node passes every test the
    node whose smallest p-value is largest is returned alone.
    """
    scope = sorted(scope)
    n = X.shape[0]
    if len(scope) < 2:
        raise InvalidParameterError("identify_layer needs at least two nodes in scope")
    lam = lambda_schedule(len(scope), n, cfg.c_lambda)
    S = empirical_covariance(X, scope)
    theta = _estimate_precision(S, lam, cfg, scope)
    if cfg.refit:
        support = np.abs(theta.theta) > cfg.zero_tol
        theta = refit_on_support(S, support, cfg.glasso_tol, cfg.glasso_max_iter, labels=scope)
    if not theta.converged:
        log.warning("round %d: graphical lasso did not converge (KKT %.3g)", t, theta.kkt)
    diag = RoundDiagnostics(t, scope, [], lam, theta.converged, theta.kkt)

    def test(l, stop_early, stop_below=None):
        others = [k for k in scope if k != l]
        ok, res = all_independent(residual(X, theta, l), X, others, cfg.alpha, cfg.n_perm, cfg.seed,
                                  node=l, bonferroni=cfg.bonferroni, stop_early=stop_early,
                                  stop_after=cfg.stop_after, stop_below=stop_below)
        for k, r in res.items():
            diag.pvalues[(l, k)] = r.p_value
        return ok, min(r.p_value for r in res.values())

    layer = [l for l in scope if test(l, stop_early=True)[0]]
    if not layer:
        # largest smallest p-value wins, ties to the lower label; a node is
        # abandoned as soon as one of its p-values falls below the current best
        best, best_p = None, -1.0
        for l in scope:
            _, minp = test(l, stop_early=False, stop_below=best_p if best is not None else None)
            if minp > best_p:
                best, best_p = l, minp
        layer = [best]
        diag.fallback = True
        log.info("round %d: no node passed; falling back to node %d (min p %.3g)", t, best, best_p)
    diag.layer = sorted(layer)
    return frozenset(layer), theta, diag


def _reconstruct(p: int, identify: Callable, zero_tol: float, max_layers: int | None):
    scope = list(range(p))
    B_hat = np.zeros((p, p))
    layers, diags = [], []
    limit = max_layers if max_layers is not None else p
    t = 0
    while len(scope) > 1:
        if t >= limit:
            raise RuntimeError(f"exceeded max_layers={limit}")
        layer, theta, diag = identify(scope, t)
        upper = [k for k in scope if k not in layer]
        for l, coefs in extract_parents(theta, layer, upper, zero_tol).items():
            for k, beta in coefs.items():
                B_hat[l, k] = beta
        layers.append(layer)
        diags.append(diag)
        scope = upper
        t += 1
    if len(scope) == 1:
        layers.append(frozenset(scope))
    return LayerDecomposition(tuple(layers)), B_hat, diags


def learn(data, cfg: LearnConfig | None = None) -> LearnedDag:
    """Learn layers and a weighted adjacency matrix from an ``n x p`` sample."""
    cfg = cfg or LearnConfig()
    labels = ()
    if isinstance(data, Dataset):
        labels = data.labels
        data = data.X
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise InvalidParameterError("data must be an n x p matrix")
    n, p = X.shape
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    if p < 1:
        raise InvalidParameterError("data has no columns")
    X = X - X.mean(axis=0)

    def identify(scope, t):
        return identify_layer(X, scope, cfg, t)

    layers, B_hat, diags = _reconstruct(p, identify, cfg.zero_tol, cfg.max_layers)
    return LearnedDag(layers, B_hat, tuple(labels), diags)


def learn_population(model: SemModel, zero_tol: float = 1e-9) -> LearnedDag:
    """Run the same recursion with exact precision matrices and an exact independence oracle.

    Every residual and every node is a linear combination of the independent
    non-Gaussian noises. Two such combinations are independent iff no noise
    enters both with a nonzero coefficient, so the oracle compares supports of
    the coefficient vectors.
    """
    Sigma = population_covariance(model)
    A = total_effects(model)

    def support(v):
        return np.abs(v) > zero_tol * max(1.0, np.abs(v).max(initial=0.0))

    def identify(scope, t):
        idx = np.array(scope)
        theta = np.linalg.inv(Sigma[np.ix_(idx, idx)])
        est = PrecisionEstimate(0.5 * (theta + theta.T), 0.0, scope)
        layer = []
        for i, l in enumerate(scope):
            w = (est.theta[:, i] / est.theta[i, i]) @ A[idx]
            sw = support(w)
            if not any(np.any(sw & support(A[k])) for k in scope if k != l):
                layer.append(l)
        if not layer:
            raise RuntimeError("no node passed the exact oracle; the model is not a valid linear SEM")
        diag = RoundDiagnostics(t, list(scope), sorted(layer), 0.0, True, 0.0)
        return frozenset(layer), est, diag

    layers, B_hat, diags = _reconstruct(model.p, identify, zero_tol, None)
    return LearnedDag(layers, B_hat, (), diags)
