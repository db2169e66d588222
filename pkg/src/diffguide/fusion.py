"""Internal vs. external differences.

External evidence is fused into a state by concatenation: the state's own
dims come first, then each evidence record's dims prefixed with its
source (``sensor.speed_kmh``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .diff import Difference, Norm, Session, _seq, temporal_delta
from .errors import NameCollision, NotOrdered, TimestampMismatch
from .features import Dim, EvidenceRecord, FeatureVector, StateRecord, vector_sub


@dataclass(frozen=True)
class FusedState:
    base: StateRecord
    evidence: tuple[EvidenceRecord, ...]
    fused: FeatureVector


def fuse(state: StateRecord, evidence: Sequence[EvidenceRecord] = ()) -> FusedState:
    dims = list(state.features.dims)
    names = set(state.features.names)
    for ev in evidence:
        if ev.timestamp != state.timestamp:
            raise TimestampMismatch(
                f"evidence from {ev.source} at t={ev.timestamp} does not match "
                f"state {state.id!r} at t={state.timestamp}")
        for d in ev.features.dims:
            name = f"{ev.source}.{d.name}"
            if name in names:
                raise NameCollision(f"fused dimension {name!r} appears twice")
            names.add(name)
            dims.append(Dim(name, d.value, d.unit))
    return FusedState(state, tuple(evidence), FeatureVector(tuple(dims)))


def internal_difference(s_t: StateRecord, s_prev: StateRecord, norm: Norm | str = Norm.L2,
                        session: Session | None = None) -> Difference:
    """``f(s_t) - f(s_prev)`` from the states alone."""
    return temporal_delta(s_prev, s_t, norm, session)


def external_difference(s_t: StateRecord, e_t: Sequence[EvidenceRecord],
                        s_prev: StateRecord, e_prev: Sequence[EvidenceRecord],
                        norm: Norm | str = Norm.L2, session: Session | None = None) -> Difference:
    """``g(s_t, E_t) - g(s_prev, E_prev)`` over the fused vectors.

    The evidence must have the same shape at both instants; otherwise the
    fused vectors are incompatible.
    """
    if s_t.timestamp is None or s_prev.timestamp is None or not s_t.timestamp > s_prev.timestamp:
        raise NotOrdered(f"{s_prev.id!r} must precede {s_t.id!r}")
    cur = fuse(s_t, e_t).fused
    prev = fuse(s_prev, e_prev).fused
    return Difference(s_prev.id, s_t.id, "external", vector_sub(cur, prev),
                      Norm.parse(norm), _seq(session))
