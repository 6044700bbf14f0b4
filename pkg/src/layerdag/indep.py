"""Squared distance covariance and the permutation independence test built on it.

The statistic is the V-statistic of Szekely, Rizzo & Bakirov (2007),
``mean_ij(A_ij * B_ij)`` for double-centered distance matrices ``A`` and
``B``. For scalar samples it is evaluated in ``O(n log n)`` without forming
the distance matrices: row sums come from a sorted pass, and the cross term
``sum_ij |x_i - x_j| |y_i - y_j|`` from a Fenwick tree over the ranks of
``y`` visited in ``x`` order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import InvalidParameterError

__all__ = ["TestResult", "dcov_sq", "indep_test", "all_independent", "pair_seed"]


@numba.njit(cache=True)
def _row_sums_sorted(v):
    # sum_j |v_i - v_j| for ascending v
    n = v.shape[0]
    total = v.sum()
    out = np.empty(n)
    c = 0.0
    for i in range(n):
        out[i] = v[i] * (2 * i - n) + total - 2.0 * c
        c += v[i]
    return out


@numba.njit(cache=True)
def _dcov_xsorted(x, a, y):
    """V^2 for ascending ``x`` with row sums ``a`` and aligned ``y``."""
    n = x.shape[0]
    order = np.argsort(y, kind="mergesort")
    ys = y[order]
    bs = _row_sums_sorted(ys)
    rank = np.empty(n, np.int64)
    b = np.empty(n)
    for pos in range(n):
        rank[order[pos]] = pos
        b[order[pos]] = bs[pos]

    # f = (1, y, x, xy) laid out by rank of y, for suffix sums
    fr = np.empty((n, 4))
    for i in range(n):
        r = rank[i]
        fr[r, 0] = 1.0
        fr[r, 1] = y[i]
        fr[r, 2] = x[i]
        fr[r, 3] = x[i] * y[i]
    suffix = np.zeros((n + 1, 4))
    for r in range(n - 1, -1, -1):
        for m in range(4):
            suffix[r, m] = suffix[r + 1, m] + fr[r, m]
    tot = suffix[0].copy()

    tree = np.zeros((n + 1, 4))
    prefix = np.zeros(4)
    f = np.empty(4)
    low = np.empty(4)
    cross = 0.0
    for i in range(n):
        r = rank[i]
        f[0] = 1.0
        f[1] = y[i]
        f[2] = x[i]
        f[3] = x[i] * y[i]
        low[:] = 0.0
        k = r  # ranks < r, 1-based tree index r
        while k > 0:
            for m in range(4):
                low[m] += tree[k, m]
            k -= k & (-k)
        c1 = 4 * low[0] - 2 * prefix[0] + 2 * suffix[r + 1, 0] - tot[0] + f[0]
        cy = 4 * low[1] - 2 * prefix[1] + 2 * suffix[r + 1, 1] - tot[1] + f[1]
        cx = 4 * low[2] - 2 * prefix[2] + 2 * suffix[r + 1, 2] - tot[2] + f[2]
        cxy = 4 * low[3] - 2 * prefix[3] + 2 * suffix[r + 1, 3] - tot[3] + f[3]
        cross += x[i] * y[i] * c1 - x[i] * cy - y[i] * cx + cxy
        k = r + 1
        while k <= n:
            for m in range(4):
                tree[k, m] += f[m]
            k += k & (-k)
        for m in range(4):
            prefix[m] += f[m]

    nf = float(n)
    s2 = 0.0
    for i in range(n):
        s2 += a[i] * b[i]
    v = cross / nf**2 - 2.0 * s2 / nf**3 + a.sum() * b.sum() / nf**4
    return max(v, 0.0)


@numba.njit(cache=True)
def _perm_stats(xs, a, y_xorder, perms):
    # perms index positions in x order
    out = np.empty(perms.shape[0])
    for b in range(perms.shape[0]):
        out[b] = _dcov_xsorted(xs, a, y_xorder[perms[b]])
    return out


@numba.njit(cache=True)
def _perm_stats_quadratic(A, y, perms):
    # A is the double-centered distance matrix of x; centering one side suffices
    n = y.shape[0]
    out = np.empty(perms.shape[0])
    yp = np.empty(n)
    for b in range(perms.shape[0]):
        for i in range(n):
            yp[i] = y[perms[b, i]]
        acc = 0.0
        for i in range(n):
            yi = yp[i]
            row = 0.0
            for j in range(i + 1, n):
                row += A[i, j] * abs(yi - yp[j])
            acc += row
        out[b] = max(2.0 * acc / (n * n), 0.0)
    return out


def _double_centered(x):
    d = np.abs(x[:, None] - x[None, :])
    m = d.mean(axis=0)
    return d - m[None, :] - m[:, None] + m.mean()


#: Sample size above which permutation statistics use the O(n log n) kernel.
QUADRATIC_MAX_N = 200


def _prepare(x, y):
    x = np.ascontiguousarray(x, dtype=float).ravel()
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise InvalidParameterError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    x = x - x.mean()
    y = y - y.mean()
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    return xs, _row_sums_sorted(xs), y[order]


def _constant(v) -> bool:
    return v.shape[0] == 0 or v.max() == v.min()


def dcov_sq(x, y) -> float:
    """Squared sample distance covariance of two scalar samples (V-statistic)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise InvalidParameterError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise InvalidParameterError("need at least 2 observations")
    if _constant(x) or _constant(y):
        return 0.0
    xs, a, ys = _prepare(x, y)
    return float(_dcov_xsorted(xs, a, ys))


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_permutations: int
    alpha: float

    __test__ = False  # keep pytest from collecting this class

    @property
    def reject(self) -> bool:
        return self.p_value <= self.alpha


def _check_level(alpha, n_perm):
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if n_perm < 1:
        raise InvalidParameterError(f"need at least one permutation, got {n_perm}")


def indep_test(x, y, alpha: float = 0.01, n_perm: int = 199, seed=None,
               stop_after: int | None = None) -> TestResult:
    """Permutation test of independence based on :func:`dcov_sq`.

    The p-value is ``(1 + #{b : stat_b >= observed}) / (n_perm + 1)`` with
    ``stat_b`` computed after permuting ``y``.

    With ``stop_after = h`` permutations are drawn sequentially and the test
    stops as soon as ``h`` of them reach the observed statistic, reporting
    ``h / m`` after ``m`` permutations (Besag & Clifford, 1991). Clearly
    independent pairs then cost a few dozen permutations, so large
    ``n_perm`` stays affordable. ``n_permutations`` of the result records
    how many were used.
    """
    _check_level(alpha, n_perm)
    if stop_after is not None and stop_after < 1:
        raise InvalidParameterError(f"stop_after must be >= 1, got {stop_after}")
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    if n != y.shape[0]:
        raise InvalidParameterError(f"length mismatch: {n} vs {y.shape[0]}")
    if n < 4:
        raise InvalidParameterError(f"need at least 4 observations, got {n}")
    if _constant(x) or _constant(y):
        return TestResult(0.0, 1.0, n_perm, alpha)
    rng = np.random.default_rng(seed)
    # observed and permuted values come from the same kernel so ties compare exactly
    if n <= QUADRATIC_MAX_N:
        A = _double_centered(x - x.mean())
        yc = y - y.mean()

        def stats_for(perms):
            return _perm_stats_quadratic(A, yc, perms)
    else:
        xs, a, ys = _prepare(x, y)

        def stats_for(perms):
            return _perm_stats(xs, a, ys, perms)

    observed = float(stats_for(np.arange(n)[None, :])[0])
    # permutations that reproduce the observed pairing up to round-off count as ties
    cut = observed * (1 - 1e-12)
    block = n_perm if stop_after is None else min(n_perm, max(32, 4 * stop_after))
    hits = done = 0
    while done < n_perm:
        m = min(block, n_perm - done)
        perms = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
        ge = stats_for(perms) >= cut
        if stop_after is not None and hits + int(ge.sum()) >= stop_after:
            used = done + int(np.flatnonzero(ge)[stop_after - hits - 1]) + 1
            return TestResult(observed, stop_after / used, used, alpha)
        hits += int(ge.sum())
        done += m
    return TestResult(observed, (1 + hits) / (n_perm + 1), n_perm, alpha)


def pair_seed(seed: int, l: int, k: int) -> np.random.SeedSequence:
    """Permutation stream for testing node ``l``'s residual against node ``k``."""
    return np.random.SeedSequence([int(seed), int(l) + 1, int(k) + 1])


def all_independent(e, X, others, alpha: float = 0.01, n_perm: int = 199, seed: int = 0,
                    node=None, bonferroni: bool = False, stop_early: bool = True,
                    stop_after: int | None = None, stop_below: float | None = None):
    """Test ``e`` against every column ``X[:, k]`` for ``k`` in ``others``.

    Returns ``(passed, results)`` where ``results`` maps each tested node to
    its :class:`TestResult`. ``passed`` is true iff no test rejects. With
    ``stop_early`` the sweep ends at the first rejection (nodes are visited
    in ascending order). ``bonferroni`` divides ``alpha`` by ``len(others)``;
    ``n_perm`` is raised when needed so that ``2 / (n_perm + 1)`` does not
    exceed the per-test level.
    ``stop_after`` is passed on to :func:`indep_test`. With ``stop_below``
    the sweep also ends at the first p-value strictly below that bound.
    """
    others = sorted(int(k) for k in others)
    results = {}
    if not others:
        return True, results
    level = alpha / len(others) if bonferroni else alpha
    # enough permutations that a p-value of 2 / (B + 1) is still a rejection
    n_perm = max(n_perm, math.ceil(2.0 / level - 1e-9) - 1)
    X = np.asarray(X)
    tag = -1 if node is None else int(node)
    passed = True
    for k in others:
        res = indep_test(e, X[:, k], level, n_perm, seed=pair_seed(seed, tag, k), stop_after=stop_after)
        results[k] = res
        if res.reject:
            passed = False
            if stop_early:
                break
        if stop_below is not None and res.p_value < stop_below:
            break
    return passed, results
