"""Append-only history of observed states with raw-payload traceability.

The on-disk form is JSON lines (UTF-8, LF), one :class:`HistoryRecord` per
line. Relabeling a state appends a superseding record; nothing is rewritten.
Only one writer may hold a store at a time (advisory ``flock`` on a
sidecar ``.lock`` file); any number of readers may open it.
"""

from __future__ import annotations

import fcntl
import json
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .diff import Difference, Norm, Session, _seq
from .errors import (
    DuplicateStateId,
    EmptyHistory,
    StorageFailure,
    UnknownState,
)
from .features import StateRecord, vector_sub

LABELS = ("normal", "abnormal", "unlabeled")


class ReferenceStrategy(str, Enum):
    LATEST = "latest"
    MEAN = "mean"
    MEDOID = "medoid"


@dataclass(frozen=True)
class HistoryRecord:
    state: StateRecord
    label: str = "unlabeled"
    appended_at: int = -1

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")

    def to_json(self) -> str:
        d = {"appended_at": self.appended_at, "label": self.label, "state": self.state.to_dict()}
        return json.dumps(d, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "HistoryRecord":
        d = json.loads(line)
        return cls(StateRecord.from_dict(d["state"]), d["label"], int(d["appended_at"]))


class HistoryStore:
    """In-memory when ``path`` is None, otherwise backed by a JSONL file."""

    def __init__(self, path: str | os.PathLike | None = None, writer: bool = True):
        self.path = Path(path) if path is not None else None
        self.writer = writer
        self._records: list[HistoryRecord] = []
        self._lock_fh = None
        if self.path is not None:
            if writer:
                self._acquire_lock()
            self.reload()

    def _acquire_lock(self) -> None:
        lock_path = self.path.with_name(self.path.name + ".lock")
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fh = open(lock_path, "a")
        except OSError as exc:
            raise StorageFailure(f"cannot open lock file {lock_path}: {exc}") from None
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            fh.close()
            raise StorageFailure(f"{self.path} is locked by another writer") from None
        self._lock_fh = fh

    def close(self) -> None:
        if self._lock_fh is not None:
            fcntl.flock(self._lock_fh, fcntl.LOCK_UN)
            self._lock_fh.close()
            self._lock_fh = None

    def __enter__(self) -> "HistoryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def reload(self) -> None:
        """Re-read the log; a trailing line without LF is an unfinished write and skipped."""
        self._records = []
        if self.path is None or not self.path.exists():
            return
        data = self.path.read_bytes().decode("utf-8")
        for line in data.split("\n")[:-1]:
            if line:
                self._records.append(HistoryRecord.from_json(line))

    # -- writing -----------------------------------------------------------

    def _write(self, record: HistoryRecord) -> None:
        if self.path is None:
            return
        if not self.writer:
            raise StorageFailure("store opened read-only")
        try:
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(record.to_json() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"append to {self.path} failed: {exc}") from None

    def _next_seq(self) -> int:
        return self._records[-1].appended_at + 1 if self._records else 0

    def append(self, state: StateRecord, label: str = "unlabeled") -> int:
        """Store a new state; returns its sequence number."""
        if isinstance(state, HistoryRecord):
            state, label = state.state, state.label
        if state.synthetic:
            raise StorageFailure(f"refusing to store synthetic state {state.id!r}")
        if state.raw_ref is None:
            raise StorageFailure(f"state {state.id!r} has no raw payload or reference")
        if any(r.state.id == state.id for r in self._records):
            raise DuplicateStateId(state.id)
        record = HistoryRecord(state, label, self._next_seq())
        self._write(record)
        self._records.append(record)
        return record.appended_at

    def relabel(self, state_id: str, label: str) -> int:
        """Append a record that supersedes the label of ``state_id``."""
        prev = self.get(state_id)
        record = HistoryRecord(prev.state, label, self._next_seq())
        self._write(record)
        self._records.append(record)
        return record.appended_at

    # -- reading -----------------------------------------------------------

    def records(self) -> list[HistoryRecord]:
        """The full log in append order, superseded records included."""
        return list(self._records)

    def list(self) -> list[HistoryRecord]:
        """One record per state (its latest label), in first-append order."""
        latest: dict[str, HistoryRecord] = {}
        for r in self._records:
            latest[r.state.id] = r
        return sorted(latest.values(), key=lambda r: self.first_appended(r.state.id))

    def first_appended(self, state_id: str) -> int:
        for r in self._records:
            if r.state.id == state_id:
                return r.appended_at
        raise UnknownState(state_id)

    def get(self, state_id: str) -> HistoryRecord:
        for r in reversed(self._records):
            if r.state.id == state_id:
                return r
        raise UnknownState(state_id)

    def raw_lookup(self, state_id: str) -> bytes | str:
        """Stored inline bytes, or the stored URI unresolved."""
        return self.get(state_id).state.raw_ref.payload

    def __len__(self) -> int:
        return len(self.list())

    def __iter__(self) -> Iterator[HistoryRecord]:
        return iter(self.list())


def _current(store: HistoryStore | Iterable[HistoryRecord]) -> list[HistoryRecord]:
    if isinstance(store, HistoryStore):
        return store.list()
    return list(store)


def _feature_matrix(states: Sequence[StateRecord]) -> np.ndarray:
    first = states[0].features
    for s in states[1:]:
        first.check_compatible(s.features)
    return np.array([s.features.values for s in states], dtype=float).reshape(len(states), len(first))


def select_reference(store: HistoryStore | Iterable[HistoryRecord],
                     strategy: ReferenceStrategy | str = ReferenceStrategy.LATEST) -> StateRecord:
    """Pick the reference state to compare the present against.

    ``latest`` is the most recently appended state, ``mean`` a synthetic
    state with componentwise mean features (id ``synthetic:mean``, no raw
    payload), ``medoid`` the stored state with the smallest total L2
    distance to all others (earliest wins ties).
    """
    strategy = ReferenceStrategy(strategy)
    records = _current(store)
    if not records:
        raise EmptyHistory("history is empty")
    if strategy is ReferenceStrategy.LATEST:
        return max(records, key=lambda r: r.appended_at).state
    states = [r.state for r in records]
    z = _feature_matrix(states)
    if strategy is ReferenceStrategy.MEAN:
        features = states[0].features.with_values(z.mean(axis=0))
        return StateRecord("synthetic:mean", features)
    dist = np.sqrt(((z[:, None, :] - z[None, :, :]) ** 2).sum(axis=2))
    sums = dist.sum(axis=1)
    # records are in first-append order, so the first near-minimal sum is the earliest
    best = sums.min()
    return states[int(np.flatnonzero(sums <= best + 1e-12 * max(best, 1.0))[0])]


def compare_with_history(s_tk: StateRecord, store: HistoryStore | Iterable[HistoryRecord],
                         strategy: ReferenceStrategy | str = ReferenceStrategy.LATEST,
                         norm: Norm | str = Norm.L2, session: Session | None = None) -> Difference:
    """Current state minus the selected reference state."""
    ref = select_reference(store, strategy)
    delta = vector_sub(s_tk.features, ref.features)
    return Difference(s_tk.id, ref.id, "history", delta, Norm.parse(norm), _seq(session))
