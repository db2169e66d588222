"""Differences between states: deltas, magnitudes, impact and selection.

Two sign conventions coexist on purpose:

* :func:`compute_difference` returns ``f(x_i) - f(x_j)`` (first minus second);
* :func:`temporal_delta` returns ``f(later) - f(earlier)``.

So ``temporal_delta(a, b).delta == -compute_difference(a, b).delta``.
"""

from __future__ import annotations

import itertools
import json
import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InsufficientHistory,
    MixedLocation,
    NegativeWeight,
    NotOrdered,
    TooFewSubObjects,
)
from .features import FeatureVector, StateRecord, vector_sub

KINDS = ("temporal", "spatial", "history", "external")


class Norm(str, Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "Linf"

    @classmethod
    def parse(cls, value: "Norm | str") -> "Norm":
        if isinstance(value, Norm):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise ValueError(f"unknown norm {value!r}; expected L1, L2 or Linf")


def norm_of(values: Sequence[float], norm: Norm | str = Norm.L2) -> float:
    norm = Norm.parse(norm)
    if not values:
        return 0.0
    if norm is Norm.L2:
        return math.hypot(*values)
    if norm is Norm.L1:
        return math.fsum(abs(v) for v in values)
    return max(abs(v) for v in values)


class Session:
    """Hands out detection-order sequence numbers.

    Each logical session owns one counter; ``select_main_differences``
    breaks impact ties by these numbers.
    """

    def __init__(self, start: int = 0):
        self._counter = itertools.count(start)
        self._lock = threading.Lock()

    def next_seq(self) -> int:
        with self._lock:
            return next(self._counter)


_default_session = Session()


def _seq(session: Session | None) -> int:
    return (session or _default_session).next_seq()


@dataclass(frozen=True)
class Difference:
    from_id: str
    to_id: str
    kind: str
    delta: FeatureVector
    norm: Norm = Norm.L2
    seq: int = 0
    magnitude: float = field(default=math.nan)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown difference kind {self.kind!r}")
        object.__setattr__(self, "norm", Norm.parse(self.norm))
        object.__setattr__(self, "magnitude", norm_of(self.delta.values, self.norm))

    def to_dict(self) -> dict:
        return {
            "from_id": self.from_id,
            "to_id": self.to_id,
            "kind": self.kind,
            "norm": self.norm.value,
            "seq": self.seq,
            "dims": self.delta.to_list(),
            "magnitude": self.magnitude,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Difference":
        return cls(d["from_id"], d["to_id"], d["kind"], FeatureVector.from_list(d["dims"]),
                   Norm.parse(d.get("norm", "L2")), int(d.get("seq", 0)))


@dataclass(frozen=True)
class WeightProfile:
    id: str = "unit"
    weights: Mapping[str, float] = field(default_factory=dict)
    default: float = 1.0

    def __post_init__(self):
        bad = {k: w for k, w in self.weights.items() if not w >= 0}
        if bad or not self.default >= 0:
            raise NegativeWeight(f"weight profile {self.id!r} has negative weights {bad}")

    def weight(self, name: str) -> float:
        return float(self.weights.get(name, self.default))


UNIT_WEIGHTS = WeightProfile()


@dataclass(frozen=True)
class ImpactScore:
    diff: Difference
    score: float
    weights_id: str


def compute_difference(x_i: StateRecord, x_j: StateRecord, norm: Norm | str = Norm.L2,
                       session: Session | None = None) -> Difference:
    """``f(x_i) - f(x_j)``; kind is inferred from how both states are located."""
    if x_i.is_temporal and x_j.is_temporal:
        kind = "temporal"
    elif x_i.is_spatial and x_j.is_spatial:
        kind = "spatial"
    else:
        raise MixedLocation(f"cannot compare {x_i.id!r} and {x_j.id!r}: one temporal, one spatial")
    delta = vector_sub(x_i.features, x_j.features)
    return Difference(x_i.id, x_j.id, kind, delta, Norm.parse(norm), _seq(session))


def temporal_delta(s_earlier: StateRecord, s_later: StateRecord, norm: Norm | str = Norm.L2,
                   session: Session | None = None) -> Difference:
    """``f(s_later) - f(s_earlier)``; requires strictly increasing time."""
    if not (s_earlier.is_temporal and s_later.is_temporal):
        raise MixedLocation("temporal_delta needs two timestamped states")
    if not s_later.timestamp > s_earlier.timestamp:
        raise NotOrdered(f"{s_later.id!r} (t={s_later.timestamp}) is not after "
                         f"{s_earlier.id!r} (t={s_earlier.timestamp})")
    delta = vector_sub(s_later.features, s_earlier.features)
    return Difference(s_earlier.id, s_later.id, "temporal", delta, Norm.parse(norm), _seq(session))


def check_ordered(stream: Sequence[StateRecord]) -> None:
    for a, b in zip(stream, stream[1:]):
        if a.timestamp is None or b.timestamp is None or not b.timestamp > a.timestamp:
            raise NotOrdered(f"stream not strictly increasing at {a.id!r} -> {b.id!r}")


def latest_difference(stream: Sequence[StateRecord], norm: Norm | str = Norm.L2,
                      session: Session | None = None) -> Difference:
    """Change between the last two states of a time-ordered stream."""
    if len(stream) < 2:
        raise InsufficientHistory(f"need at least 2 states, got {len(stream)}")
    check_ordered(stream)
    return temporal_delta(stream[-2], stream[-1], norm, session)


def impact(diff: Difference, weights: WeightProfile = UNIT_WEIGHTS) -> ImpactScore:
    """Weighted L1 of the delta: ``sum_k w_k * |delta_k|``."""
    score = math.fsum(weights.weight(d.name) * abs(d.value) for d in diff.delta.dims)
    return ImpactScore(diff, score, weights.id)


def rank_differences(diffs: Iterable[Difference],
                     weights: WeightProfile = UNIT_WEIGHTS) -> list[ImpactScore]:
    """All impact scores, by descending score then ascending seq."""
    scores = [impact(d, weights) for d in diffs]
    scores.sort(key=lambda s: (-s.score, s.diff.seq))
    return scores


def select_main_differences(diffs: Iterable[Difference], n: int,
                            weights: WeightProfile = UNIT_WEIGHTS) -> list[Difference]:
    """Size-``n`` subset with the largest total impact.

    Impacts are additive and nonnegative, so sorting and taking the first
    ``n`` is optimal. Ties go to the smaller ``seq``. If ``n`` exceeds the
    number of differences, all of them are returned, sorted.
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return [s.diff for s in rank_differences(diffs, weights)[:n]]


def _check_spatial(subs: Sequence[StateRecord]) -> None:
    if len(subs) < 2:
        raise TooFewSubObjects(f"need at least 2 sub-objects, got {len(subs)}")
    for s in subs:
        if not s.is_spatial:
            raise MixedLocation(f"sub-object {s.id!r} has no region label")
    for s in subs[1:]:
        subs[0].features.check_compatible(s.features)


def pairwise_spatial_differences(subs: Sequence[StateRecord], norm: Norm | str = Norm.L2,
                                 session: Session | None = None) -> list[Difference]:
    """``z_i - z_j`` for every ordered pair ``i != j`` (``m(m-1)`` results)."""
    _check_spatial(subs)
    out = []
    for i, a in enumerate(subs):
        for j, b in enumerate(subs):
            if i != j:
                out.append(Difference(a.id, b.id, "spatial", vector_sub(a.features, b.features),
                                      Norm.parse(norm), _seq(session)))
    return out


def spatial_variability(subs: Sequence[StateRecord], norm: Norm | str = Norm.L2) -> float:
    """Mean pairwise difference magnitude over the sub-objects."""
    _check_spatial(subs)
    norm = Norm.parse(norm)
    z = np.array([s.features.values for s in subs], dtype=float)
    m = len(subs)
    if z.shape[1] == 0:
        return 0.0
    i, j = np.triu_indices(m, k=1)
    d = z[i] - z[j]
    if norm is Norm.L2:
        mags = np.sqrt(np.einsum("ij,ij->i", d, d))
    elif norm is Norm.L1:
        mags = np.abs(d).sum(axis=1)
    else:
        mags = np.abs(d).max(axis=1)
    # each unordered pair stands for two ordered pairs with equal magnitude
    return float(2.0 * mags.sum() / (m * (m - 1)))
