"""Pruned dynamic program over change point locations.

Tables are indexed by the 1-based length ``t`` of the prefix ``Z_1..Z_t``
and the number of change points ``k``.  With ``H_t(k, tau)`` the value of
placing the k-th change at ``tau`` after the best ``(k-1)``-segmentation of
``Z_1..Z_{tau-1}``::

    H_t(k, tau) = G[tau-1, k-1] + gof(A[tau-1, k-1], tau, t + 1)
    G[t, k]     = max over tau in S_t(k) of H_t(k, tau)
    A[t, k]     = the maximizing tau (smallest on ties)

``S_t(1) = {1+w, ..., t-w+1}`` and ``S_t(k+1)`` keeps the members of
``S_t(k)`` that do at least as well at level ``k+1`` as the last possible
location ``t-w+1``.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass

import numpy as np

from .divergence import make_scorer
from .model import (
    Cp3oConfig,
    DetectionResult,
    GofMetric,
    Segmentation,
    TimeSeries,
    validate_config,
)

logger = logging.getLogger(__name__)

NEG_INF = -np.inf


@dataclass
class DpState:
    """Tables of the dynamic program.

    ``G[t, k]`` is ``-inf`` where no legal ``k``-segmentation of the first
    ``t`` points exists and ``A[t, k]`` is 0 there.  ``S[t]`` holds the
    candidate set for the level currently being processed and ``H[t]`` the
    matching ``H`` values computed while pruning.
    """

    T: int
    K: int
    w: int
    G: np.ndarray
    A: np.ndarray
    S: list
    H: list
    prune_log: np.ndarray
    level: int = 0

    @classmethod
    def initial(cls, T: int, K: int, w: int) -> "DpState":
        G = np.full((T + 1, K + 1), NEG_INF)
        A = np.zeros((T + 1, K + 1), dtype=np.int64)
        G[:, 0] = 0.0
        A[:, 0] = 1
        return cls(T=T, K=K, w=w, G=G, A=A, S=[None] * (T + 1), H=[None] * (T + 1),
                   prune_log=np.zeros((T + 1, K + 1), dtype=np.int64))


def _h_batch(state: DpState, scorer, kappa: int, taus: np.ndarray, t: int) -> np.ndarray:
    out = np.full(len(taus), NEG_INF)
    if len(taus) == 0:
        return out
    prev = state.G[taus - 1, kappa - 1]
    ok = np.isfinite(prev)
    if ok.any():
        tt = taus[ok]
        out[ok] = prev[ok] + scorer(state.A[tt - 1, kappa - 1], tt, t + 1)
    return out


def h_value(state: DpState, scorer, kappa: int, w: int, tau: int, t: int) -> float:
    """``H_t(kappa, tau)``; ``-inf`` when ``tau`` cannot be the kappa-th change."""
    if not 1 + kappa * w <= tau <= t - w + 1:
        return NEG_INF
    return float(_h_batch(state, scorer, kappa, np.array([tau]), t)[0])


def prune_step(state: DpState, scorer, kappa: int, w: int, t: int,
               candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Candidate set ``S_t(kappa+1)`` from ``S_t(kappa)``.

    Needs level ``kappa`` complete for every prefix shorter than ``t - w + 1``.
    Returns the surviving candidates with their ``H_t(kappa+1, .)`` values.
    Candidates with no legal ``(kappa+1)``-segmentation are dropped.
    """
    if len(candidates) == 0:
        return candidates, np.empty(0)
    h_next = _h_batch(state, scorer, kappa + 1, candidates, t)
    bench_pos = np.searchsorted(candidates, t - w + 1)
    if bench_pos == len(candidates) or candidates[bench_pos] != t - w + 1:
        raise RuntimeError(f"benchmark t-w+1={t - w + 1} missing from S_t at t={t}")
    bench = h_next[bench_pos]
    if bench == NEG_INF:
        return candidates[:0], np.empty(0)
    keep = h_next >= bench
    return candidates[keep], h_next[keep]


def dp_iterate(state: DpState, scorer, kappa: int, w: int, prune: bool = True) -> DpState:
    """Run level ``kappa`` of the dynamic program for every ``t`` in ``[2w, T]``."""
    if kappa != state.level + 1:
        raise ValueError(f"level {state.level + 1} must run next, not {kappa}")
    T = state.T
    for t in range(2 * w, T + 1):
        if kappa == 1 or not prune:
            cand = np.arange(1 + kappa * w, t - w + 2, dtype=np.int64)
            h = _h_batch(state, scorer, kappa, cand, t)
        else:
            cand = state.S[t] if state.S[t] is not None else np.empty(0, dtype=np.int64)
            h = state.H[t] if state.H[t] is not None else np.empty(0)
        state.prune_log[t, kappa] = len(cand)
        if len(cand) and h.max() > NEG_INF:
            best = int(np.argmax(h))
            state.G[t, kappa] = h[best]
            state.A[t, kappa] = cand[best]
        if prune and kappa < state.K:
            state.S[t], state.H[t] = prune_step(state, scorer, kappa, w, t, cand)
    state.level = kappa
    return state


def reconstruct_cps(state: DpState, kappa: int, t: int) -> Segmentation:
    """Follow the back-pointers from ``A[t, kappa]`` to recover all kappa points."""
    if kappa == 0:
        return Segmentation((), t)
    if not np.isfinite(state.G[t, kappa]):
        raise ValueError(f"no valid {kappa}-segmentation of the first {t} points")
    cps = []
    end = t
    for k in range(kappa, 0, -1):
        tau = int(state.A[end, k])
        cps.append(tau)
        end = tau - 1
    return Segmentation(tuple(reversed(cps)), t)


def _line_sse(x: np.ndarray, y: np.ndarray) -> float:
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid)


def select_num_changes(gof_curve) -> tuple[int, bool]:
    """Pick the number of change points at the kink of the goodness-of-fit curve.

    Fits two least-squares lines sharing the knee ``c``, one through
    ``k = 1..c`` and one through ``k = c..K``, for each ``c`` in
    ``2..K-1`` and returns the ``c`` with the smallest total squared error
    (smallest ``c`` on ties).

    Returns
    -------
    kappa_star : int
    fallback : bool
        True when the curve has fewer than three points, in which case
        ``kappa_star`` is simply ``K``.
    """
    y = np.asarray(gof_curve, dtype=np.float64)
    K = len(y)
    if K < 3:
        logger.warning("knee selection needs K >= 3 points, got %d; returning K", K)
        return K, True
    x = np.arange(1, K + 1, dtype=np.float64)
    sse = np.array([
        _line_sse(x[:c], y[:c]) + _line_sse(x[c - 1:], y[c - 1:]) for c in range(2, K)
    ])
    # rounding noise must not break exact ties
    tol = 1e-12 * (1.0 + float(np.sum((y - y.mean()) ** 2)))
    return int(np.flatnonzero(sse <= sse.min() + tol)[0]) + 2, False


def run_cp3o(seq: TimeSeries, cfg: Cp3oConfig) -> DetectionResult:
    """Detect change points in ``seq``.

    Runs levels ``1..K`` of the pruned dynamic program, then selects the
    number of change points from the curve of ``G[T, k]``.  Levels for
    which the series is too short are dropped from the curve.
    """
    cfg = validate_config(seq, cfg)
    start = time.perf_counter()
    scorer = make_scorer(cfg.metric, seq)
    T, w = seq.T, cfg.w
    state = DpState.initial(T, cfg.K, w)
    k_eff = 0
    for kappa in range(1, cfg.K + 1):
        dp_iterate(state, scorer, kappa, w, prune=cfg.pruning_enabled)
        if not np.isfinite(state.G[T, kappa]):
            break
        k_eff = kappa
    curve = [float(v) for v in state.G[T, 1:k_eff + 1]]
    segs = {k: reconstruct_cps(state, k, T) for k in range(1, k_eff + 1)}
    kappa_star, fallback = select_num_changes(curve)
    degenerate = bool(np.allclose(curve, 0.0, rtol=0.0, atol=1e-12))
    if degenerate:
        logger.warning("degenerate: zero divergence everywhere; change points are arbitrary")
    return DetectionResult(
        selected_k=kappa_star,
        change_points=segs[kappa_star],
        gof_curve=curve,
        all_segmentations=segs,
        prune_stats=state.prune_log[:, :k_eff + 1].copy(),
        elapsed=time.perf_counter() - start,
        degenerate=degenerate,
        knee_fallback=fallback,
    )


def exhaustive_best_segmentation(seq: TimeSeries, metric: GofMetric, kappa: int, w: int,
                                 max_T: int = 60, max_kappa: int = 2
                                 ) -> tuple[float, Segmentation]:
    """Best ``kappa``-segmentation by enumerating every legal tuple.

    A test oracle for small instances only; ``max_T`` and ``max_kappa``
    guard against accidental use on real data.
    """
    T = seq.T
    if T > max_T or kappa > max_kappa:
        raise ValueError(
            f"instance too large for enumeration (T={T} > {max_T} or kappa={kappa} > {max_kappa})"
        )
    metric = validate_config(seq, Cp3oConfig(K=max(kappa, 1), w=w, metric=metric)).metric
    scorer = make_scorer(metric, seq)
    best_val, best = NEG_INF, None
    for cps in itertools.combinations(range(1 + w, T - w + 2), kappa):
        if any(b - a < w for a, b in zip(cps, cps[1:])):
            continue
        bounds = (1, *cps, T + 1)
        val = 0.0
        for j in range(1, kappa + 1):
            val += scorer.one(bounds[j - 1], bounds[j], bounds[j + 1])
        if val > best_val or best is None:
            best_val, best = val, cps
    if best is None:
        raise ValueError(f"no legal {kappa}-segmentation with w={w} and T={T}")
    return (0.0 if kappa == 0 else best_val), Segmentation(best, T)


__all__ = [
    "DpState",
    "h_value",
    "dp_iterate",
    "prune_step",
    "reconstruct_cps",
    "select_num_changes",
    "run_cp3o",
    "exhaustive_best_segmentation",
]
