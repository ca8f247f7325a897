"""Domain types shared across the package.

All public indices are 1-based: a change point ``tau`` is the first index of
a new segment, so a segmentation of ``Z_1..Z_T`` with points
``tau_1 < ... < tau_k`` has segments ``[tau_{j-1}, tau_j)`` with sentinels
``tau_0 = 1`` and ``tau_{k+1} = T + 1``.  Row ``i`` of
``TimeSeries.data`` holds ``Z_{i+1}``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ConfigError(ValueError):
    """Invalid detection or metric configuration."""


class MetricKind(str, Enum):
    ENERGY_COMPLETE = "energy-complete"
    ENERGY_INCOMPLETE = "energy"
    KS = "ks"
    KS_WINDOWED = "ks-windowed"

    @property
    def is_energy(self) -> bool:
        return self in (MetricKind.ENERGY_COMPLETE, MetricKind.ENERGY_INCOMPLETE)

    @property
    def is_windowed(self) -> bool:
        return self in (MetricKind.ENERGY_INCOMPLETE, MetricKind.KS_WINDOWED)


@dataclass(frozen=True)
class GofMetric:
    """Divergence used to score adjacent segment pairs.

    Parameters
    ----------
    kind : MetricKind
        Which divergence to compute.
    alpha : float
        Distance exponent for the energy kinds, in ``(0, 2]``. ``alpha = 2``
        only detects changes in mean.
    delta : int or None
        Window size for the incomplete energy statistic and windowed KS.
        ``None`` means "use ``w - 1``", filled in by :func:`validate_config`.
    """

    kind: MetricKind = MetricKind.ENERGY_INCOMPLETE
    alpha: float = 1.0
    delta: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.kind.is_energy and not 0.0 < self.alpha <= 2.0:
            raise ConfigError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.delta is not None and self.delta < 1:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")

    @classmethod
    def energy(cls, alpha: float = 1.0, delta: int | None = None) -> "GofMetric":
        return cls(MetricKind.ENERGY_INCOMPLETE, alpha, delta)

    @classmethod
    def energy_complete(cls, alpha: float = 1.0) -> "GofMetric":
        return cls(MetricKind.ENERGY_COMPLETE, alpha)

    @classmethod
    def ks(cls) -> "GofMetric":
        return cls(MetricKind.KS)

    @classmethod
    def ks_windowed(cls, delta: int | None = None) -> "GofMetric":
        return cls(MetricKind.KS_WINDOWED, delta=delta)


class TimeSeries:
    """An immutable ``T x d`` matrix of time-ordered observations.

    One-dimensional input is treated as a univariate series (``d = 1``).
    Non-finite entries are rejected.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"expected a 1-D or 2-D array, got {arr.ndim} dimensions")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("a time series needs T >= 1 rows and d >= 1 columns")
        bad = ~np.isfinite(arr)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise ValueError(
                f"non-finite value at row {row + 1}, column {col + 1}; "
                "missing values are not imputed"
            )
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def T(self) -> int:
        return self._data.shape[0]

    @property
    def d(self) -> int:
        return self._data.shape[1]

    def __len__(self):
        return self.T

    def __repr__(self):
        return f"TimeSeries(T={self.T}, d={self.d})"


@dataclass(frozen=True)
class Segmentation:
    change_points: tuple[int, ...]
    series_length: int

    def __post_init__(self):
        cps = tuple(int(c) for c in self.change_points)
        object.__setattr__(self, "change_points", cps)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError(f"change points must be strictly increasing: {cps}")
        if cps and (cps[0] < 2 or cps[-1] > self.series_length):
            raise ValueError(
                f"change points must lie in [2, {self.series_length}], got {cps}"
            )

    def __len__(self):
        return len(self.change_points)

    def __iter__(self):
        return iter(self.change_points)

    def boundaries(self) -> list[int]:
        """Change points with the sentinels ``1`` and ``T + 1`` attached."""
        return [1, *self.change_points, self.series_length + 1]

    def labels(self) -> np.ndarray:
        """Segment label of every index ``1..T`` (0-based array)."""
        labels = np.zeros(self.series_length, dtype=np.int64)
        for cp in self.change_points:
            labels[cp - 1:] += 1
        return labels

    def is_legal(self, w: int) -> bool:
        """Check the bound and minimum-gap constraints for gap ``w``."""
        cps = self.change_points
        lo, hi = 1 + w, self.series_length - w + 1
        if any(c < lo or c > hi for c in cps):
            return False
        return all(b - a >= w for a, b in zip(cps, cps[1:]))


@dataclass(frozen=True)
class Cp3oConfig:
    """Settings for one detection run.

    ``K`` is the largest number of change points fitted and ``w`` the minimum
    distance between change points (equivalently, the minimum segment
    length).
    """

    K: int = 5
    w: int = 30
    metric: GofMetric = field(default_factory=GofMetric)
    pruning_enabled: bool = True

    @property
    def alpha(self) -> float:
        return self.metric.alpha

    @property
    def delta(self) -> int | None:
        return self.metric.delta


def validate_config(ts: TimeSeries, cfg: Cp3oConfig) -> Cp3oConfig:
    """Check ``cfg`` against ``ts`` and fill in the default window.

    Returns
    -------
    Cp3oConfig
        A copy with ``metric.delta`` set (``w - 1`` when unset).

    Raises
    ------
    ConfigError
        If the configuration cannot run on this series.
    """
    metric = cfg.metric
    if cfg.K < 1:
        raise ConfigError(f"K must be a positive integer, got {cfg.K}")
    if cfg.w < 1:
        raise ConfigError(f"w must be >= 1, got {cfg.w}")
    if ts.T < 2 * cfg.w:
        raise ConfigError(
            f"series too short for one change: T={ts.T} < 2w={2 * cfg.w}"
        )
    if metric.kind.is_energy and not 0.0 < metric.alpha <= 2.0:
        raise ConfigError(f"alpha must lie in (0, 2], got {metric.alpha}")
    if metric.kind in (MetricKind.KS, MetricKind.KS_WINDOWED) and ts.d > 1:
        raise ConfigError("KS metric is univariate; use energy metric for d>1")
    if metric.kind in (MetricKind.ENERGY_COMPLETE, MetricKind.KS) and cfg.w < 2:
        raise ConfigError(f"{metric.kind.value} needs w >= 2, got w={cfg.w}")

    delta = metric.delta
    if metric.kind.is_windowed:
        if delta is None:
            delta = cfg.w - 1
        if delta < 1:
            raise ConfigError(f"delta must be >= 1 (w={cfg.w} gives delta={delta})")
        if delta >= cfg.w:
            raise ConfigError(f"delta must be smaller than w: delta={delta}, w={cfg.w}")
    return dataclasses.replace(cfg, metric=dataclasses.replace(metric, delta=delta))


@dataclass
class DetectionResult:
    """Output of :func:`cp3o.search.run_cp3o`.

    ``gof_curve[k - 1]`` is the approximate goodness-of-fit with ``k`` change
    points and ``all_segmentations[k]`` the matching change points.
    ``prune_stats[t, k]`` is the candidate-set size ``|S_t(k)|`` (row 0 and
    column 0 unused).
    """

    selected_k: int
    change_points: Segmentation
    gof_curve: list[float]
    all_segmentations: dict[int, Segmentation]
    prune_stats: np.ndarray
    elapsed: float
    degenerate: bool = False
    knee_fallback: bool = False

    @property
    def K(self) -> int:
        return len(self.gof_curve)
