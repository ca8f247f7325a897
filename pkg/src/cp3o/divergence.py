"""Two-sample divergences and the segment goodness-of-fit they induce.

Every divergence ``R(X, Y)`` here is a two-sample statistic scaled by
``nm / (n + m)^2``.  The goodness-of-fit of a split is
``gof(a, b, c) = R(Z_a..Z_{b-1}, Z_b..Z_{c-1})`` with 1-based, half-open
indices.

Two flavours of each computation exist: plain functions that evaluate one
split from scratch (:func:`gof_eval` and friends) and scorer objects built
once per series by :func:`make_scorer`, which the dynamic program calls in
batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import _kernels
from .model import ConfigError, GofMetric, MetricKind, TimeSeries

__all__ = [
    "EnergyIndexSets",
    "energy_stat",
    "energy_divergence",
    "energy_index_sets",
    "energy_incomplete",
    "ks_stat",
    "ks_divergence",
    "ks_windowed",
    "gof_eval",
    "make_scorer",
]

# Complete-energy scorer keeps a dense (T+1)^2 prefix table.
MAX_COMPLETE_T = 4000
# KS scorer switches from an int16 rank prefix table (T^2 * 2 bytes) to a
# sort-and-scan kernel above this length.
MAX_KS_TABLE_T = 8192


def _as_sample(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("samples must be 1-D or 2-D arrays")
    return np.ascontiguousarray(arr)


def _powdist(dist: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 1.0:
        return dist
    out = np.zeros_like(dist)
    pos = dist > 0
    out[pos] = np.exp(alpha * np.log(dist[pos]))
    return out


def _sorted_abs_pair_sum(x: np.ndarray) -> float:
    """Sum of ``|x_i - x_j|`` over ``i < j`` for a 1-D sample, in O(n log n)."""
    xs = np.sort(x)
    n = xs.shape[0]
    weights = 2.0 * np.arange(n) - (n - 1)
    return float(np.dot(weights, xs))


def _pair_sums(X: np.ndarray, Y: np.ndarray, alpha: float) -> tuple[float, float, float]:
    if X.shape[1] == 1 and alpha == 1.0:
        sx = _sorted_abs_pair_sum(X[:, 0])
        sy = _sorted_abs_pair_sum(Y[:, 0])
        pooled = _sorted_abs_pair_sum(np.concatenate([X[:, 0], Y[:, 0]]))
        return sx, sy, pooled - sx - sy
    return (
        _kernels.pair_sum_within(X, alpha),
        _kernels.pair_sum_within(Y, alpha),
        _kernels.pair_sum_cross(X, Y, alpha),
    )


def energy_stat(X, Y, alpha: float = 1.0) -> float:
    """Empirical energy distance between two samples.

    Parameters
    ----------
    X, Y : array_like, shape (n, d) and (m, d)
        Samples; 1-D input is read as ``d = 1``.
    alpha : float
        Exponent applied to Euclidean distances, in ``(0, 2]``.

    Returns
    -------
    float
        ``2 mean|x - y|^a - mean|x - x'|^a - mean|y - y'|^a`` where the
        within-sample means run over unordered pairs.  Can be negative for
        finite samples.
    """
    X, Y = _as_sample(X), _as_sample(Y)
    n, m = X.shape[0], Y.shape[0]
    if n < 2 or m < 2:
        raise ValueError(f"energy statistic needs n, m >= 2 (got n={n}, m={m})")
    if X.shape[1] != Y.shape[1]:
        raise ValueError("samples must have the same dimension")
    sx, sy, sxy = _pair_sums(X, Y, alpha)
    return 2.0 * sxy / (n * m) - sx / (n * (n - 1) / 2) - sy / (m * (m - 1) / 2)


def energy_divergence(X, Y, alpha: float = 1.0) -> float:
    """Energy statistic scaled by ``nm / (n + m)^2``."""
    n, m = len(X), len(Y)
    return n * m / (n + m) ** 2 * energy_stat(X, Y, alpha)


@dataclass(frozen=True)
class EnergyIndexSets:
    """Index pairs (1-based, ``i < j``) used by the incomplete energy statistic.

    ``within_x`` pairs all points of the last ``delta`` observations of X
    and chains the remaining X points to their successor; ``within_y`` does
    the same with the first ``delta`` observations of Y.  ``between`` is the
    ``delta x delta`` block straddling the split plus pairs mirrored about
    it, ``(s - i, s + i - 1)`` for ``i > delta``.
    """

    within_x: np.ndarray
    within_y: np.ndarray
    between: np.ndarray


def _all_pairs(lo: int, hi: int) -> np.ndarray:
    i, j = np.triu_indices(max(hi - lo, 0), k=1)
    return np.column_stack([i + lo, j + lo])


def _dedupe(pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return pairs.reshape(0, 2)
    return np.unique(pairs, axis=0)


def energy_index_sets(a: int, n: int, m: int, delta: int) -> EnergyIndexSets:
    """Build the three index sets for X = Z_a..Z_{a+n-1}, Y = Z_{a+n}..Z_{a+n+m-1}.

    Windows are clamped to the segments when ``n`` or ``m`` is at most
    ``delta``, and a pair listed by both parts of a union is kept once.
    """
    if delta < 1:
        raise ValueError(f"delta must be >= 1, got {delta}")
    s = a + n
    end = s + m
    x_lo = max(a, s - delta)
    y_hi = min(end, s + delta)

    chain_x = np.arange(a, s - delta)
    wx = np.concatenate([_all_pairs(x_lo, s), np.column_stack([chain_x, chain_x + 1])])

    chain_y = np.arange(s + delta - 1, end - 1)
    wy = np.concatenate([_all_pairs(s, y_hi), np.column_stack([chain_y, chain_y + 1])])

    gi, gj = np.meshgrid(np.arange(x_lo, s), np.arange(s, y_hi), indexing="ij")
    offs = np.arange(delta + 1, min(m, n) + 1)
    b = np.concatenate([
        np.column_stack([gi.ravel(), gj.ravel()]),
        np.column_stack([s - offs, s + offs - 1]),
    ])
    return EnergyIndexSets(_dedupe(wx.astype(np.int64)), _dedupe(wy.astype(np.int64)),
                           _dedupe(b.astype(np.int64)))


def _mean_powdist(Z: np.ndarray, pairs: np.ndarray, alpha: float) -> float:
    # pairs are 1-based
    diff = Z[pairs[:, 0] - 1] - Z[pairs[:, 1] - 1]
    return float(_powdist(np.sqrt(np.einsum("ij,ij->i", diff, diff)), alpha).mean())


def energy_incomplete(seq: TimeSeries, a: int, n: int, m: int,
                      alpha: float = 1.0, delta: int = 1) -> float:
    """Scaled incomplete-U-statistic energy divergence of adjacent segments.

    Averages distances only over :func:`energy_index_sets`, costing
    ``O(delta^2 + max(n, m))`` instead of ``O(max(n, m)^2)``.

    Parameters
    ----------
    seq : TimeSeries
    a : int
        1-based start of the left segment ``X = Z_a..Z_{a+n-1}``.
    n, m : int
        Lengths of the left and right segments.
    alpha : float
    delta : int
        Window size.

    Returns
    -------
    float
        ``nm / (n + m)^2`` times the incomplete energy statistic.
    """
    if n < 2 or m < 2:
        raise ValueError(f"incomplete energy needs n, m >= 2 (got n={n}, m={m})")
    if a < 1 or a + n + m - 1 > seq.T:
        raise IndexError(f"segments [{a}, {a + n + m - 1}] exceed series of length {seq.T}")
    sets = energy_index_sets(a, n, m, delta)
    if not (len(sets.within_x) and len(sets.within_y) and len(sets.between)):
        raise ValueError("empty index set")
    Z = seq.data
    e = (2.0 * _mean_powdist(Z, sets.between, alpha)
         - _mean_powdist(Z, sets.within_x, alpha)
         - _mean_powdist(Z, sets.within_y, alpha))
    return n * m / (n + m) ** 2 * e


def _univariate(x, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"KS metric is univariate; use energy metric for d>1 ({what})")
    return arr


def ks_stat(X, Y) -> float:
    """Twice the two-sample Kolmogorov-Smirnov statistic.

    The supremum over half-lines is evaluated at the pooled sample points
    using closed empirical CDFs.
    """
    x = np.sort(_univariate(X, "X"))
    y = np.sort(_univariate(Y, "Y"))
    if len(x) < 1 or len(y) < 1:
        raise ValueError("KS statistic needs non-empty samples")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / len(x)
    fy = np.searchsorted(y, grid, side="right") / len(y)
    return 2.0 * float(np.max(np.abs(fx - fy)))


def ks_divergence(X, Y) -> float:
    n, m = len(X), len(Y)
    return n * m / (n + m) ** 2 * ks_stat(X, Y)


def ks_windowed(seq: TimeSeries, a: int, b: int, c: int, delta: int) -> float:
    """KS divergence using only ``delta`` points on each side of the split ``b``."""
    lo = max(a, b - delta)
    hi = min(c - 1, b + delta - 1)
    if lo > b - 1 or hi < b:
        raise ValueError("empty window")
    Z = seq.data
    return ks_divergence(Z[lo - 1:b - 1], Z[b - 1:hi])


def gof_eval(metric: GofMetric, seq: TimeSeries, a: int, b: int, c: int) -> float:
    """Goodness-of-fit of the split ``Z_a..Z_{b-1} | Z_b..Z_{c-1}``."""
    if not a < b < c:
        raise ValueError(f"need a < b < c, got {(a, b, c)}")
    if a < 1 or c > seq.T + 1:
        raise IndexError(f"indices {(a, b, c)} outside series of length {seq.T}")
    Z = seq.data
    kind = metric.kind
    if kind is MetricKind.ENERGY_COMPLETE:
        return energy_divergence(Z[a - 1:b - 1], Z[b - 1:c - 1], metric.alpha)
    if kind is MetricKind.ENERGY_INCOMPLETE:
        return energy_incomplete(seq, a, b - a, c - b, metric.alpha, _need_delta(metric))
    if kind is MetricKind.KS:
        return ks_divergence(Z[a - 1:b - 1], Z[b - 1:c - 1])
    return ks_windowed(seq, a, b, c, _need_delta(metric))


def _need_delta(metric: GofMetric) -> int:
    if metric.delta is None:
        raise ConfigError(f"{metric.kind.value} needs a window size delta")
    return metric.delta


# ---------------------------------------------------------------------------
# Batch scorers for the dynamic program.  Each takes 1-based index arrays
# ``a`` and ``b`` and a scalar ``c`` and returns gof(a, b, c) elementwise.


class _Scorer:
    def __init__(self, metric: GofMetric, seq: TimeSeries):
        self.metric = metric
        self.seq = seq

    def __call__(self, a, b, c: int) -> np.ndarray:
        raise NotImplementedError

    def one(self, a: int, b: int, c: int) -> float:
        return float(self(np.array([a]), np.array([b]), c)[0])


class _EnergyCompleteScorer(_Scorer):
    def __init__(self, metric, seq):
        super().__init__(metric, seq)
        T = seq.T
        if T > MAX_COMPLETE_T:
            raise ConfigError(
                f"energy-complete is limited to T <= {MAX_COMPLETE_T}; use energy"
            )
        D = _powdist(cdist(seq.data, seq.data), metric.alpha)
        P = np.zeros((T + 1, T + 1))
        P[1:, 1:] = D.cumsum(0).cumsum(1)
        self._P = P

    def _block(self, r0, r1, c0, c1):
        P = self._P
        return P[r1, c1] - P[r0, c1] - P[r1, c0] + P[r0, c0]

    def __call__(self, a, b, c):
        a0 = np.asarray(a, dtype=np.int64) - 1
        s = np.asarray(b, dtype=np.int64) - 1
        c0 = int(c) - 1
        n = (s - a0).astype(np.float64)
        m = (c0 - s).astype(np.float64)
        within_x = self._block(a0, s, a0, s) / 2.0
        within_y = self._block(s, c0, s, c0) / 2.0
        cross = self._block(a0, s, s, c0)
        e = 2.0 * cross / (n * m) - 2.0 * within_x / (n * (n - 1)) - 2.0 * within_y / (m * (m - 1))
        return n * m / (n + m) ** 2 * e


class _EnergyIncompleteScorer(_Scorer):
    def __init__(self, metric, seq):
        super().__init__(metric, seq)
        delta = _need_delta(metric)
        Z = np.ascontiguousarray(seq.data)
        alpha = float(metric.alpha)
        self._delta = delta
        self._adj = _DisjointSparseTable(_kernels.adjacent_powdist(Z, alpha))
        self._left, self._right, self._cross = _kernels.split_window_sums(Z, alpha, delta)
        self._diag, self._diag_off = _kernels.antidiagonal_cumsums(Z, alpha, delta)

    def __call__(self, a, b, c):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        delta = self._delta
        a0, s, c0 = a - 1, b - 1, int(c) - 1
        n, m = s - a0, c0 - s
        out = np.empty(len(a))
        slow = (n <= delta) | (m <= delta)
        for q in np.flatnonzero(slow):
            out[q] = energy_incomplete(self.seq, int(a[q]), int(n[q]), int(m[q]),
                                       self.metric.alpha, delta)
        fast = ~slow
        if fast.any():
            a0, s, n, m = a0[fast], s[fast], n[fast], m[fast]
            wx = self._left[s] + self._adj.range_sum(a0, s - delta - 1)
            wy = self._right[s] + self._adj.range_sum(s + delta - 1, np.full_like(s, c0 - 2))
            short = np.minimum(n, m)
            bx = self._cross[s] + self._diag[self._diag_off[s] + short - delta - 1]
            pairs = delta * (delta - 1) / 2.0
            e = (2.0 * bx / (delta * delta + short - delta)
                 - wx / (pairs + n - delta)
                 - wy / (pairs + m - delta))
            nf, mf = n.astype(np.float64), m.astype(np.float64)
            out[fast] = nf * mf / (nf + mf) ** 2 * e
        return out


class _KsScorer(_Scorer):
    def __init__(self, metric, seq):
        super().__init__(metric, seq)
        x = _univariate(seq.data, "series")
        if len(x) <= MAX_KS_TABLE_T:
            values, ranks = np.unique(x, return_inverse=True)
            self._table = _kernels.rank_prefix_table(ranks.astype(np.int64), len(values))
        else:
            self._table = None
            self._order = np.argsort(x, kind="stable")
            xs = x[self._order]
            self._last_of_tie = np.append(xs[1:] != xs[:-1], True)

    def __call__(self, a, b, c):
        a0 = np.asarray(a, dtype=np.int64) - 1
        s = np.asarray(b, dtype=np.int64) - 1
        if self._table is not None:
            return _kernels.ks_scaled_table(self._table, a0, s, int(c) - 1)
        perm = np.lexsort((s, a0))
        a_sorted, s_sorted = a0[perm], s[perm]
        starts = np.flatnonzero(np.r_[True, a_sorted[1:] != a_sorted[:-1], True])
        vals = _kernels.ks_scaled_grouped(self._order, self._last_of_tie, a_sorted,
                                          s_sorted, starts, int(c) - 1)
        out = np.empty(len(s))
        out[perm] = vals
        return out


class _KsWindowedScorer(_Scorer):
    def __init__(self, metric, seq):
        super().__init__(metric, seq)
        _univariate(seq.data, "series")
        self._delta = _need_delta(metric)
        self._cache: dict[int, float] = {}

    def __call__(self, a, b, c):
        delta = self._delta
        out = np.empty(len(a))
        for q, (aq, bq) in enumerate(zip(np.asarray(a).tolist(), np.asarray(b).tolist())):
            if bq - delta >= aq and bq + delta <= c:
                # both windows lie inside their segments: value depends on b only
                val = self._cache.get(bq)
                if val is None:
                    val = self._cache[bq] = ks_windowed(self.seq, aq, bq, c, delta)
                out[q] = val
            else:
                out[q] = ks_windowed(self.seq, aq, bq, c, delta)
        return out


_SCORERS = {
    MetricKind.ENERGY_COMPLETE: _EnergyCompleteScorer,
    MetricKind.ENERGY_INCOMPLETE: _EnergyIncompleteScorer,
    MetricKind.KS: _KsScorer,
    MetricKind.KS_WINDOWED: _KsWindowedScorer,
}


def make_scorer(metric: GofMetric, seq: TimeSeries) -> _Scorer:
    """Precompute what ``metric`` needs on ``seq`` for repeated batch scoring."""
    return _SCORERS[metric.kind](metric, seq)


class _DisjointSparseTable:
    """O(1) range sums of non-negative values without prefix differences.

    Prefix-sum differences lose small terms next to very large ones (heavy
    tailed data); every query here adds two partial sums instead.
    """

    def __init__(self, values: np.ndarray):
        v = np.asarray(values, dtype=np.float64)
        size = 1
        while size < max(len(v), 2):
            size *= 2
        padded = np.zeros(size)
        padded[:len(v)] = v
        self._values = padded
        levels = []
        half = 1
        while half < size:
            tab = np.empty(size)
            blocks = padded.reshape(-1, 2 * half)
            lhs = blocks[:, :half][:, ::-1].cumsum(axis=1)[:, ::-1]
            rhs = blocks[:, half:].cumsum(axis=1)
            tab.reshape(-1, 2 * half)[:, :half] = lhs
            tab.reshape(-1, 2 * half)[:, half:] = rhs
            levels.append(tab)
            half *= 2
        self._levels = np.array(levels) if levels else np.zeros((0, size))

    def range_sum(self, lo, hi) -> np.ndarray:
        """Sum over inclusive ranges ``[lo, hi]``; empty ranges give 0."""
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        out = np.zeros(np.broadcast(lo, hi).shape)
        lo, hi = np.broadcast_arrays(lo, hi)
        single = lo == hi
        out[single] = self._values[lo[single]]
        multi = lo < hi
        if multi.any():
            l, h = lo[multi], hi[multi]
            level = np.floor(np.log2(l ^ h)).astype(np.int64)
            out[multi] = self._levels[level, l] + self._levels[level, h]
        return out
