"""Segmentation-quality metrics and seeded simulation scenarios."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import Cp3oConfig, Segmentation, TimeSeries
from .search import run_cp3o

logger = logging.getLogger(__name__)

__all__ = [
    "ScenarioKind",
    "ScenarioSpec",
    "TrialReport",
    "BenchmarkSummary",
    "adjusted_rand",
    "t2e",
    "e2t",
    "generate_scenario",
    "run_trial",
    "trial_seeds",
    "run_benchmark",
]


def _pairs(counts: np.ndarray) -> int:
    counts = counts.astype(np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def adjusted_rand(seg_a: Segmentation, seg_b: Segmentation, T: int) -> float:
    """Adjusted Rand index between two segmentations of ``1..T``.

    Each segmentation is read as a labelling of the time indices.  All pair
    counts are kept as integers so only the final division rounds.  When
    the chance-corrected denominator vanishes (both labellings put every
    index in one segment, or every index in its own) the index is 1 for
    identical labellings and 0 otherwise.

    Raises
    ------
    ValueError
        If ``T < 2`` or a segmentation does not cover ``1..T``.
    """
    if T < 2:
        raise ValueError(f"adjusted Rand needs T >= 2, got {T}")
    for seg in (seg_a, seg_b):
        if seg.series_length != T:
            raise ValueError(f"segmentation covers 1..{seg.series_length}, expected 1..{T}")
    la, lb = seg_a.labels(), seg_b.labels()
    na, nb = la.max() + 1, lb.max() + 1
    table = np.bincount(la * nb + lb, minlength=na * nb).reshape(na, nb)
    index = _pairs(table)
    sum_a = _pairs(table.sum(axis=1))
    sum_b = _pairs(table.sum(axis=0))
    total = T * (T - 1) // 2
    # (index - E) / (max - E), multiplied through by 2 * total
    num = 2 * (index * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        return 1.0 if np.array_equal(la, lb) else 0.0
    return num / den


def _mean_nearest(src, dst) -> float:
    src = np.asarray(src, dtype=np.float64)
    dst = np.sort(np.asarray(dst, dtype=np.float64))
    pos = np.searchsorted(dst, src)
    left = dst[np.clip(pos - 1, 0, len(dst) - 1)]
    right = dst[np.clip(pos, 0, len(dst) - 1)]
    return float(np.mean(np.minimum(np.abs(src - left), np.abs(src - right))))


def t2e(true_cps, est_cps) -> float:
    """Mean distance from each true change point to the nearest estimate.

    ``inf`` when there are no estimates.
    """
    if len(true_cps) == 0:
        raise ValueError("t2e needs at least one true change point")
    if len(est_cps) == 0:
        return float("inf")
    return _mean_nearest(true_cps, est_cps)


def e2t(true_cps, est_cps) -> float:
    """Mean distance from each estimated change point to the nearest true one.

    An empty estimate gives 0; :class:`TrialReport` records that case in
    ``empty_estimate``.
    """
    if len(true_cps) == 0:
        raise ValueError("e2t needs at least one true change point")
    if len(est_cps) == 0:
        return 0.0
    return _mean_nearest(est_cps, true_cps)


class ScenarioKind(str, Enum):
    GAUSSIAN_MEAN_VAR = "gaussian"
    DIST_MEAN_TAIL = "distmeantail"
    HEAVY_TAIL = "heavytail"


@dataclass(frozen=True)
class ScenarioSpec:
    """A simulated series with ``k`` evenly spaced changes.

    The true change points are ``floor(i T / (k + 1)) + 1`` for
    ``i = 1..k``.  Only the Gaussian scenario supports ``k != 3``; the
    other two have a fixed list of four segment distributions.
    """

    kind: ScenarioKind
    T: int
    k: int = 3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.kind is not ScenarioKind.GAUSSIAN_MEAN_VAR and self.k != 3:
            raise ValueError(f"scenario {self.kind.value} has exactly 3 changes, got k={self.k}")
        if self.T < 2 * (self.k + 1):
            raise ValueError(f"T={self.T} too short for {self.k + 1} segments of length >= 2")

    def true_segmentation(self) -> Segmentation:
        cps = tuple(i * self.T // (self.k + 1) + 1 for i in range(1, self.k + 1))
        return Segmentation(cps, self.T)


# Consecutive Gaussian segments closer than this in (mean, variance) are redrawn.
_MIN_MEAN_GAP = 0.5
_MIN_VAR_GAP = 0.25
_MIN_VAR = 1e-3


def _gaussian_params(rng: np.random.Generator, n_seg: int) -> list[tuple[float, float]]:
    params = []
    while len(params) < n_seg:
        mu = rng.uniform(-10.0, 10.0)
        var = max(rng.uniform(0.0, 5.0), _MIN_VAR)
        if params:
            pmu, pvar = params[-1]
            if abs(mu - pmu) < _MIN_MEAN_GAP and abs(var - pvar) < _MIN_VAR_GAP:
                continue
        params.append((mu, var))
    return params


def generate_scenario(spec: ScenarioSpec) -> tuple[TimeSeries, Segmentation]:
    """Draw one series for ``spec``; the same spec always gives the same data."""
    rng = np.random.default_rng(spec.seed)
    truth = spec.true_segmentation()
    bounds = truth.boundaries()
    lengths = np.diff(bounds)
    if spec.kind is ScenarioKind.GAUSSIAN_MEAN_VAR:
        params = _gaussian_params(rng, len(lengths))
        parts = [rng.normal(mu, np.sqrt(var), n) for (mu, var), n in zip(params, lengths)]
    elif spec.kind is ScenarioKind.DIST_MEAN_TAIL:
        n1, n2, n3, n4 = lengths
        parts = [
            rng.exponential(3.0, n1),
            rng.normal(3.0, 1.0, n2),
            rng.normal(0.0, 1.0, n3),
            rng.standard_t(2.01, n4),
        ]
    else:
        n1, n2, n3, n4 = lengths
        parts = [
            rng.standard_t(0.1, n1),
            rng.standard_t(1.9, n2),
            -2.0 + rng.standard_cauchy(n3),
            rng.standard_cauchy(n4),
        ]
    return TimeSeries(np.concatenate(parts)), truth


@dataclass(frozen=True)
class TrialReport:
    """Quality of one detection run against the known truth."""

    rand: float
    t2e: float
    e2t: float
    est_k: int
    runtime: float
    empty_estimate: bool = False


@dataclass(frozen=True)
class BenchmarkSummary:
    """Means over the trials of a benchmark, plus the trials themselves."""

    rand: float
    t2e: float
    e2t: float
    est_k: float
    runtime: float
    trials: tuple[TrialReport, ...] = field(repr=False)

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def empty_estimates(self) -> int:
        return sum(r.empty_estimate for r in self.trials)


def run_trial(spec: ScenarioSpec, cfg: Cp3oConfig) -> TrialReport:
    """Simulate one series, run detection and score it."""
    seq, truth = generate_scenario(spec)
    start = time.perf_counter()
    result = run_cp3o(seq, cfg)
    runtime = time.perf_counter() - start
    est = result.change_points.change_points
    return TrialReport(
        rand=adjusted_rand(truth, result.change_points, spec.T),
        t2e=t2e(truth.change_points, est),
        e2t=e2t(truth.change_points, est),
        est_k=len(est),
        runtime=runtime,
        empty_estimate=len(est) == 0,
    )


def trial_seeds(seed: int, trials: int) -> list[int]:
    """Per-trial seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)]


def run_benchmark(spec: ScenarioSpec, cfg: Cp3oConfig, trials: int) -> BenchmarkSummary:
    """Run ``trials`` independent trials of ``spec`` and average the metrics.

    ``spec.seed`` is the master seed; trial ``i`` uses the ``i``-th seed
    from :func:`trial_seeds`.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    reports = []
    for seed in trial_seeds(spec.seed, trials):
        reports.append(run_trial(ScenarioSpec(spec.kind, spec.T, spec.k, seed), cfg))
    empty = sum(r.empty_estimate for r in reports)
    if empty:
        logger.warning("%d of %d trials returned no change points", empty, trials)
    return BenchmarkSummary(
        rand=float(np.mean([r.rand for r in reports])),
        t2e=float(np.mean([r.t2e for r in reports])),
        e2t=float(np.mean([r.e2t for r in reports])),
        est_k=float(np.mean([r.est_k for r in reports])),
        runtime=float(np.mean([r.runtime for r in reports])),
        trials=tuple(reports),
    )
