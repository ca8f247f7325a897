"""Numba kernels behind the divergence scorers."""

import numba
import numpy as np


@numba.njit(cache=True)
def _powdist(x, y, alpha):
    s = 0.0
    for k in range(x.shape[0]):
        diff = x[k] - y[k]
        s += diff * diff
    dist = np.sqrt(s)
    if alpha == 1.0:
        return dist
    if dist == 0.0:
        return 0.0
    return np.exp(alpha * np.log(dist))


@numba.njit(cache=True)
def pair_sum_within(X, alpha):
    """Sum of ``|x_i - x_j|^alpha`` over unordered pairs ``i < j``."""
    n = X.shape[0]
    total = 0.0
    for i in range(n):
        row = 0.0
        for j in range(i + 1, n):
            row += _powdist(X[i], X[j], alpha)
        total += row
    return total


@numba.njit(cache=True)
def pair_sum_cross(X, Y, alpha):
    """Sum of ``|x_i - y_j|^alpha`` over all ``(i, j)``."""
    total = 0.0
    for i in range(X.shape[0]):
        row = 0.0
        for j in range(Y.shape[0]):
            row += _powdist(X[i], Y[j], alpha)
        total += row
    return total


@numba.njit(cache=True)
def adjacent_powdist(Z, alpha):
    out = np.empty(Z.shape[0] - 1)
    for p in range(Z.shape[0] - 1):
        out[p] = _powdist(Z[p], Z[p + 1], alpha)
    return out


@numba.njit(cache=True)
def split_window_sums(Z, alpha, delta):
    """Per-split sums over the fixed ``delta`` windows around each split.

    For a split ``s`` (0-based index of the first right-hand point) returns
    the pair sums inside ``[s - delta, s)``, inside ``[s, s + delta)`` and
    across the two windows.  Entries whose window leaves the series are NaN.
    """
    T = Z.shape[0]
    left = np.full(T + 1, np.nan)
    right = np.full(T + 1, np.nan)
    cross = np.full(T + 1, np.nan)
    for s in range(T + 1):
        if s - delta >= 0:
            acc = 0.0
            for i in range(s - delta, s):
                for j in range(i + 1, s):
                    acc += _powdist(Z[i], Z[j], alpha)
            left[s] = acc
        if s + delta <= T:
            acc = 0.0
            for i in range(s, s + delta):
                for j in range(i + 1, s + delta):
                    acc += _powdist(Z[i], Z[j], alpha)
            right[s] = acc
        if s - delta >= 0 and s + delta <= T:
            acc = 0.0
            for i in range(s - delta, s):
                for j in range(s, s + delta):
                    acc += _powdist(Z[i], Z[j], alpha)
            cross[s] = acc
    return left, right, cross


@numba.njit(cache=True)
def antidiagonal_cumsums(Z, alpha, delta):
    """Running sums of ``|Z[s-i] - Z[s+i-1]|^alpha`` for ``i > delta``.

    Returns a flat buffer and per-split offsets; entry ``offsets[s] + r - 1``
    holds the sum over ``i = delta+1 .. delta+r``.  Sums start at
    ``delta + 1`` so a query never subtracts two running totals.
    """
    T = Z.shape[0]
    offsets = np.zeros(T + 2, dtype=np.int64)
    for s in range(T + 1):
        top = min(s, T - s)
        offsets[s + 1] = offsets[s] + max(top - delta, 0)
    flat = np.empty(offsets[T + 1])
    for s in range(T + 1):
        top = min(s, T - s)
        acc = 0.0
        pos = offsets[s]
        for i in range(delta + 1, top + 1):
            acc += _powdist(Z[s - i], Z[s + i - 1], alpha)
            flat[pos] = acc
            pos += 1
    return flat, offsets


# The three helpers below take slices first and use explicit compares: both
# are needed for LLVM to vectorize the loops (about 4x faster).


@numba.njit(cache=True, fastmath=True)
def _shift(walk, step, lo, hi):
    w = walk[lo:hi]
    st = step[lo:hi]
    for q in range(hi - lo):
        w[q] += st[q]


@numba.njit(cache=True, fastmath=True)
def _shift_track(walk, step, best, lo, hi):
    w = walk[lo:hi]
    st = step[lo:hi]
    b = best[lo:hi]
    for q in range(hi - lo):
        v = w[q] + st[q]
        w[q] = v
        if v < 0.0:
            v = -v
        if v > b[q]:
            b[q] = v


@numba.njit(cache=True, fastmath=True)
def _track(walk, best, lo, hi):
    w = walk[lo:hi]
    b = best[lo:hi]
    for q in range(hi - lo):
        v = w[q]
        if v < 0.0:
            v = -v
        if v > b[q]:
            b[q] = v


@numba.njit(cache=True)
def ks_scaled_grouped(order, last_of_tie, a0, s, starts, c0):
    """Scaled KS divergence for splits of windows ``[a0, c0)``.

    Splits must be sorted by ``a0``; ``starts`` delimits runs sharing the
    same ``a0``.  Each run is handled in one pass over the sorted series.

    For a split with ``n`` points left and ``m`` right, walking the window in
    value order and stepping ``+m`` on left points and ``-n`` on right points
    traces ``nm (F_X - F_Y)``; the scaled statistic is
    ``2 max |walk| / (n + m)^2``, read off at the end of each tie group.

    ``order`` is the stable argsort of the univariate series and
    ``last_of_tie[k]`` marks sorted positions followed by a larger value.
    """
    out = np.empty(s.shape[0])
    T = order.shape[0]
    for g in range(starts.shape[0] - 1):
        lo = starts[g]
        hi = starts[g + 1]
        a = a0[lo]
        L = float(c0 - a)
        cnt = hi - lo
        split = s[lo:hi]
        # float64 walks stay exact (integers below 2^53) and vectorize
        n = (split - a).astype(np.float64)
        step_right = -n
        step_left = L - n
        walk = np.zeros(cnt)
        best = np.zeros(cnt)
        seen = 0
        dirty = False
        for k in range(T):
            idx = order[k]
            if idx >= a and idx < c0:
                seen += 1
                # idx is a left point exactly for the splits above it
                q0 = np.searchsorted(split, idx, side="right")
                if last_of_tie[k] and not dirty:
                    _shift_track(walk, step_right, best, 0, q0)
                    _shift_track(walk, step_left, best, q0, cnt)
                else:
                    _shift(walk, step_right, 0, q0)
                    _shift(walk, step_left, q0, cnt)
                    dirty = True
            if dirty and last_of_tie[k]:
                _track(walk, best, 0, cnt)
                dirty = False
            if seen == c0 - a:
                break
        for q in range(cnt):
            out[lo + q] = 2.0 * best[q] / (L * L)
    return out


@numba.njit(cache=True)
def rank_prefix_table(ranks, n_ranks):
    """``table[i, r]`` = number of the first ``i`` points with rank ``<= r``."""
    T = ranks.shape[0]
    table = np.zeros((T + 1, n_ranks), dtype=np.int16)
    for i in range(T):
        table[i + 1] = table[i]
        for r in range(ranks[i], n_ranks):
            table[i + 1, r] += 1
    return table


@numba.njit(cache=True, fastmath=True)
def _walk_max(S, A, C, L, m, n):
    best = 0
    for r in range(S.shape[0]):
        v = L * np.int32(S[r]) - m * np.int32(A[r]) - n * np.int32(C[r])
        best = max(best, abs(v))
    return best


@numba.njit(cache=True)
def ks_scaled_table(table, a0, s, c0):
    """Scaled KS divergence of ``[a0, s) | [s, c0)`` from a rank prefix table.

    At every distinct value ``r`` the walk ``m #X<=r - n #Y<=r`` equals
    ``L S_r - m A_r - n C_r`` in terms of the table rows at ``s``, ``a0``
    and ``c0``; the result is ``2 max |walk| / L^2``.
    """
    out = np.empty(s.shape[0])
    C = table[c0]
    for q in range(s.shape[0]):
        n = s[q] - a0[q]
        m = c0 - s[q]
        L = n + m
        best = _walk_max(table[s[q]], table[a0[q]], C, np.int32(L), np.int32(m), np.int32(n))
        out[q] = 2.0 * best / (float(L) * float(L))
    return out
