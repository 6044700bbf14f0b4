"""Empirical covariance, graphical lasso and regression residuals from a precision matrix."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    InvalidPrecisionError,
    SingularMatrixError,
)

__all__ = [
    "PrecisionEstimate",
    "GlassoConvergenceWarning",
    "empirical_covariance",
    "glasso",
    "kkt_residual",
    "lambda_schedule",
    "refit_on_support",
    "residual",
]


class GlassoConvergenceWarning(UserWarning):
    pass


@dataclass(eq=False)
class PrecisionEstimate:
    """A symmetric positive-definite precision matrix over ``labels``.

    ``labels[i]`` is the node (data column) that row/column ``i`` of ``theta``
    refers to.
    """

    theta: np.ndarray
    lam: float
    labels: tuple
    converged: bool = True
    n_iter: int = 0
    kkt: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.labels = tuple(int(v) for v in self.labels)
        q = len(self.labels)
        if self.theta.shape != (q, q):
            raise InvalidParameterError(
                f"theta has shape {self.theta.shape} for {q} labels")

    def index(self, node: int) -> int:
        return self.labels.index(node)

    def entry(self, l: int, k: int) -> float:
        return float(self.theta[self.index(l), self.index(k)])

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "lambda": self.lam,
            "theta": self.theta.ravel().tolist(),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrecisionEstimate":
        q = len(d["labels"])
        theta = np.asarray(d["theta"], dtype=float).reshape(q, q)
        return cls(theta, float(d["lambda"]), tuple(d["labels"]), bool(d.get("converged", True)))


def empirical_covariance(X: np.ndarray, subset=None) -> np.ndarray:
    """``(1/n) Xc^T Xc`` over the columns in ``subset`` (all columns if None)."""
    X = np.asarray(X, dtype=float)
    if subset is not None:
        X = X[:, list(subset)]
    n = X.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / n


def lambda_schedule(q: int, n: int, c: float = 0.5) -> float:
    """``c * sqrt(log(max(q, n)) / n)``."""
    if q < 1 or n < 2 or c <= 0:
        raise InvalidParameterError(f"need q >= 1, n >= 2, c > 0; got q={q}, n={n}, c={c}")
    return c * np.sqrt(np.log(max(q, n)) / n)


@numba.njit(cache=True)
def _lasso_cd(W, s, lam, beta, skip, tol, max_sweeps):
    # minimise 0.5 b'W b - s'b + sum_i lam_i |b_i| over coordinates != skip, in place;
    # lam_i = inf pins b_i to zero
    q = W.shape[0]
    for _ in range(max_sweeps):
        dmax = 0.0
        for i in range(q):
            if i == skip:
                continue
            r = s[i]
            for m in range(q):
                if m != i and m != skip:
                    r -= W[i, m] * beta[m]
            if r > lam[i]:
                new = (r - lam[i]) / W[i, i]
            elif r < -lam[i]:
                new = (r + lam[i]) / W[i, i]
            else:
                new = 0.0
            d = abs(new - beta[i])
            if d > dmax:
                dmax = d
            beta[i] = new
        if dmax < tol:
            break


@numba.njit(cache=True)
def _glasso_sweep(S, W, Bcoef, lam, inner_tol, inner_sweeps):
    # one pass over all columns of the block coordinate descent; Bcoef[:, j] holds
    # the lasso coefficients of column j (Bcoef[j, j] unused)
    q = S.shape[0]
    for j in range(q):
        beta = Bcoef[:, j].copy()
        beta[j] = 0.0
        _lasso_cd(W, S[:, j], lam[:, j], beta, j, inner_tol, inner_sweeps)
        Bcoef[:, j] = beta
        for i in range(q):
            if i == j:
                continue
            acc = 0.0
            for m in range(q):
                if m != j:
                    acc += W[i, m] * beta[m]
            W[i, j] = acc
            W[j, i] = acc


def _theta_from(W: np.ndarray, Bcoef: np.ndarray) -> np.ndarray:
    q = W.shape[0]
    theta = np.empty((q, q))
    for j in range(q):
        beta = Bcoef[:, j].copy()
        beta[j] = 0.0
        tjj = 1.0 / (W[j, j] - W[:, j] @ beta)
        theta[:, j] = -beta * tjj
        theta[j, j] = tjj
    # columns agree on the support at convergence; average the magnitudes
    return 0.5 * (theta + theta.T)


def _penalty_matrix(lam, q: int) -> np.ndarray:
    L = np.array(np.broadcast_to(np.asarray(lam, dtype=float), (q, q)))
    np.fill_diagonal(L, 0.0)
    return L


def _initial_covariance(S: np.ndarray, L: np.ndarray) -> np.ndarray:
    # Shrink S towards its diagonal just enough that every off-diagonal entry lies
    # within its penalty box |W_lk - S_lk| <= L_lk. The start is then positive
    # definite and feasible, and each row update keeps W positive definite.
    off = ~np.eye(S.shape[0], dtype=bool)
    a = np.abs(S[off])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(a > 0, L[off] / a, np.inf)
    gamma = float(min(1.0, ratios.min(initial=np.inf)))
    if gamma == 0.0:
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            gamma = 1e-3  # unpenalised entries on a singular S: no feasible PD start
    D = np.diag(np.diag(S))
    return (1.0 - gamma) * S + gamma * D


def kkt_residual(S: np.ndarray, theta: np.ndarray, lam) -> float:
    """Max violation of the stationarity conditions of the off-diagonal-penalised problem.

    With ``W = theta^{-1}``: ``W_ll = S_ll``; ``W_lk - S_lk = lam_lk * sign(theta_lk)``
    where ``theta_lk != 0``; ``|W_lk - S_lk| <= lam_lk`` elsewhere. ``lam``
    is a scalar or a ``q x q`` matrix of per-entry penalties.
    """
    W = np.linalg.inv(theta)
    D = W - S
    q = S.shape[0]
    L = _penalty_matrix(lam, q)
    off = ~np.eye(q, dtype=bool)
    nz = (theta != 0) & off
    z = (theta == 0) & off & np.isfinite(L)
    viol = [np.abs(np.diag(D)).max(initial=0.0)]
    if nz.any():
        viol.append(np.abs(D[nz] - L[nz] * np.sign(theta[nz])).max())
    if z.any():
        viol.append(np.maximum(np.abs(D[z]) - L[z], 0.0).max())
    return float(max(viol))


def glasso(S: np.ndarray, lam, tol: float = 1e-6, max_iter: int = 500,
           labels=None) -> PrecisionEstimate:
    """Graphical lasso with the penalty on off-diagonal entries only.

    Maximises ``log det(theta) - tr(S theta) - lam * sum_{l != k} |theta_lk|``
    by block coordinate descent on the covariance estimate ``W`` (Friedman et
    al., 2008), starting from the diagonal solution. Iterates until the KKT
    residual is at most ``tol``; if ``max_iter`` sweeps are exhausted the
    result has ``converged=False`` and a :class:`GlassoConvergenceWarning` is
    emitted.

    ``lam`` may also be a symmetric ``q x q`` matrix of per-entry penalties
    (its diagonal is ignored); ``inf`` entries force the entry to zero.
    A scalar ``lam == 0`` returns the plain inverse of ``S`` and requires
    ``S`` to be positive definite.
    """
    S = np.asarray(S, dtype=float)
    q = S.shape[0]
    if S.shape != (q, q) or not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max(initial=0))):
        raise InvalidParameterError("S must be a symmetric square matrix")
    scalar = np.ndim(lam) == 0
    if np.any(np.asarray(lam) < 0):
        raise InvalidParameterError("penalties must be >= 0")
    labels = tuple(range(q)) if labels is None else tuple(labels)
    S = 0.5 * (S + S.T)

    if scalar and lam == 0:
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise SingularMatrixError("lambda = 0 requires a positive-definite S") from None
        Linv = np.linalg.solve(L, np.eye(q))
        theta = Linv.T @ Linv
        theta = 0.5 * (theta + theta.T)
        return PrecisionEstimate(theta, 0.0, labels, True, 0, kkt_residual(S, theta, 0.0))

    d = np.diag(S)
    if np.any(d <= 0):
        bad = int(np.flatnonzero(d <= 0)[0])
        raise SingularMatrixError(f"variance of column {labels[bad]} is zero")
    L = _penalty_matrix(lam, q)
    W = _initial_covariance(S, L)
    Bcoef = np.zeros((q, q))
    theta = np.diag(1.0 / d)
    kkt = kkt_residual(S, theta, L)
    inner_tol = min(1e-10, tol * 1e-3)
    it = 0
    while kkt > tol and it < max_iter:
        _glasso_sweep(S, W, Bcoef, L, inner_tol, 1000)
        it += 1
        theta = _theta_from(W, Bcoef)
        kkt = kkt_residual(S, theta, L)
    converged = kkt <= tol
    if not converged:
        warnings.warn(
            f"graphical lasso stopped after {it} sweeps with KKT residual {kkt:.3g} > {tol:.3g}",
            GlassoConvergenceWarning, stacklevel=2)
    return PrecisionEstimate(theta, float(lam) if scalar else float(np.max(L[np.isfinite(L)], initial=0.0)),
                             labels, converged, it, kkt)


def refit_on_support(S: np.ndarray, support: np.ndarray, tol: float = 1e-6, max_iter: int = 500,
                     labels=None) -> PrecisionEstimate:
    """Unpenalised Gaussian MLE of the precision matrix with a fixed zero pattern.

    Entries outside ``support`` (off-diagonal) are held at zero; the rest are
    free. This removes the shrinkage bias of the lasso fit that selected the
    support.
    """
    q = S.shape[0]
    L = np.where(np.asarray(support, dtype=bool), 0.0, np.inf)
    L = np.minimum(L, L.T)  # keep an entry free if either triangle selected it
    est = glasso(S, L, tol, max_iter, labels)
    est.lam = 0.0
    return est


def residual(X: np.ndarray, theta: PrecisionEstimate, l: int) -> np.ndarray:
    """``x_l + X_{-l} theta_{-l,l} / theta_{ll}`` over the nodes of ``theta``.

    ``X`` is indexed by node label (column ``k`` holds node ``k``); it is
    centered here before use.
    """
    i = theta.index(l)
    t = theta.theta
    if t[i, i] <= 0:
        raise InvalidPrecisionError(f"non-positive diagonal entry for node {l}")
    cols = list(theta.labels)
    Xs = np.asarray(X, dtype=float)[:, cols]
    Xs = Xs - Xs.mean(axis=0)
    w = t[:, i] / t[i, i]
    return Xs @ w
