"""Normal/abnormal classification of differences and states.

Both detectors use a strict inequality: a statistic equal to its bound is
normal.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .diff import Difference, Norm, check_ordered, norm_of
from .errors import EmptyHistory, InsufficientNormalHistory, NegativeThreshold
from .features import StateRecord
from .history import HistoryRecord, HistoryStore, _current, _feature_matrix

DEFAULT_K_SIGMA = 3.0


@dataclass(frozen=True)
class ThresholdSpec:
    theta: float = math.inf
    eta: float = math.inf
    k_sigma: float = DEFAULT_K_SIGMA

    def __post_init__(self):
        if not (self.theta >= 0 and self.eta >= 0 and self.k_sigma >= 0):
            raise NegativeThreshold(f"thresholds must be nonnegative: {self}")


@dataclass(frozen=True)
class AnomalyVerdict:
    abnormal: bool
    statistic: float
    bound: float
    method: str

    def to_dict(self) -> dict:
        return {"abnormal": self.abnormal, "statistic": self.statistic,
                "bound": self.bound, "method": self.method}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _check_bound(name: str, value: float) -> None:
    if not value >= 0:
        raise NegativeThreshold(f"{name} must be >= 0, got {value}")


def detect_threshold(diff: Difference, theta: float) -> AnomalyVerdict:
    """Abnormal iff the difference magnitude is strictly above ``theta``."""
    _check_bound("theta", theta)
    return AnomalyVerdict(diff.magnitude > theta, diff.magnitude, theta, "threshold")


def estimate_threshold(magnitudes: Iterable[float], k_sigma: float = DEFAULT_K_SIGMA,
                       labels: Sequence[str] | None = None) -> float:
    """``mean + k_sigma * sample_std`` of the normal-labeled magnitudes.

    Without ``labels`` every magnitude counts as normal.
    """
    _check_bound("k_sigma", k_sigma)
    values = list(magnitudes)
    if labels is not None:
        values = [v for v, lab in zip(values, labels, strict=True) if lab == "normal"]
    if len(values) < 2:
        raise InsufficientNormalHistory(f"need >= 2 normal magnitudes, got {len(values)}")
    return statistics.fmean(values) + k_sigma * statistics.stdev(values)


def history_magnitudes(store: HistoryStore | Iterable[HistoryRecord],
                       norm: Norm | str = Norm.L2) -> tuple[list[float], list[str]]:
    """Magnitudes of consecutive temporal changes in the store, with labels.

    Each change carries the label of its later state. Spatial records are
    ignored.
    """
    records = sorted((r for r in _current(store) if r.state.is_temporal),
                     key=lambda r: r.state.timestamp)
    check_ordered([r.state for r in records])
    mags, labels = [], []
    for a, b in zip(records, records[1:]):
        a.state.features.check_compatible(b.state.features)
        delta = [y - x for x, y in zip(a.state.features.values, b.state.features.values)]
        mags.append(norm_of(delta, norm))
        labels.append(b.label)
    return mags, labels


def nearest_history_distance(s_t: StateRecord, store: HistoryStore | Iterable[HistoryRecord],
                             metric: Norm | str = Norm.L2) -> float:
    """Distance from ``s_t`` to its nearest normal-labeled stored state."""
    normal = [r.state for r in _current(store) if r.label == "normal"]
    if not normal:
        raise EmptyHistory("no normal-labeled states in history")
    z = _feature_matrix(normal)
    normal[0].features.check_compatible(s_t.features)
    d = z - np.asarray(s_t.features.values, dtype=float)
    metric = Norm.parse(metric)
    if d.shape[1] == 0:
        return 0.0
    if metric is Norm.L2:
        dist = np.sqrt(np.einsum("ij,ij->i", d, d))
    elif metric is Norm.L1:
        dist = np.abs(d).sum(axis=1)
    else:
        dist = np.abs(d).max(axis=1)
    return float(dist.min())


def detect_history(s_t: StateRecord, store: HistoryStore | Iterable[HistoryRecord],
                   eta: float, metric: Norm | str = Norm.L2) -> AnomalyVerdict:
    """Abnormal iff the nearest-normal distance is strictly above ``eta``."""
    _check_bound("eta", eta)
    d = nearest_history_distance(s_t, store, metric)
    return AnomalyVerdict(d > eta, d, eta, "history")
