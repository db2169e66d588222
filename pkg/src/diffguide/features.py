"""Feature vectors, observed states, evidence records and extractors.

A :class:`FeatureVector` is an ordered list of named, optionally unit
annotated real values. Two vectors are compatible when their name
sequences (and units) match; every arithmetic operation checks this.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    IncompatibleVectors,
    NonFiniteFeature,
    UnknownExtractor,
    UnparseablePayload,
)

EXTRACTOR_KINDS = ("passthrough", "select_dims", "scripted_table")
EVIDENCE_SOURCES = ("user", "sensor", "database")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass(frozen=True)
class Dim:
    name: str
    value: float
    unit: str | None = None


@dataclass(frozen=True)
class FeatureVector:
    dims: tuple[Dim, ...] = ()

    def __post_init__(self):
        dims = tuple(self.dims)
        object.__setattr__(self, "dims", dims)
        seen = set()
        for d in dims:
            if d.name in seen:
                raise IncompatibleVectors(f"duplicate dimension name {d.name!r}")
            seen.add(d.name)
            if not math.isfinite(d.value):
                raise NonFiniteFeature(f"dimension {d.name!r} has value {d.value!r}")

    @classmethod
    def of(cls, *items: tuple) -> "FeatureVector":
        """Build from ``(name, value)`` or ``(name, value, unit)`` tuples."""
        return cls(tuple(Dim(t[0], float(t[1]), t[2] if len(t) > 2 else None) for t in items))

    @classmethod
    def from_values(cls, values: Iterable[float], names: Sequence[str] | None = None,
                    unit: str | None = None) -> "FeatureVector":
        values = [float(v) for v in values]
        if names is None:
            names = [f"x{k}" for k in range(len(values))]
        return cls(tuple(Dim(n, v, unit) for n, v in zip(names, values, strict=True)))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(d.value for d in self.dims)

    @property
    def units(self) -> tuple[str | None, ...]:
        return tuple(d.unit for d in self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def __getitem__(self, name: str) -> float:
        for d in self.dims:
            if d.name == name:
                return d.value
        raise KeyError(name)

    def is_compatible(self, other: "FeatureVector") -> bool:
        return self.names == other.names and self.units == other.units

    def check_compatible(self, other: "FeatureVector") -> None:
        if self.names != other.names:
            raise IncompatibleVectors(f"dimension names differ: {self.names} vs {other.names}")
        if self.units != other.units:
            raise IncompatibleVectors(f"units differ: {self.units} vs {other.units}")

    def with_values(self, values: Iterable[float]) -> "FeatureVector":
        """Same names and units, new values."""
        return FeatureVector(tuple(Dim(d.name, float(v), d.unit)
                                   for d, v in zip(self.dims, values, strict=True)))

    def restrict(self, names: Sequence[str]) -> "FeatureVector":
        by_name = {d.name: d for d in self.dims}
        try:
            return FeatureVector(tuple(by_name[n] for n in names))
        except KeyError as exc:
            raise IncompatibleVectors(f"dimension {exc.args[0]!r} not present") from None

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)

    def to_list(self) -> list[dict]:
        return [{"name": d.name, "value": d.value, "unit": d.unit} for d in self.dims]

    @classmethod
    def from_list(cls, items: Iterable[Mapping[str, Any]]) -> "FeatureVector":
        return cls(tuple(Dim(str(it["name"]), float(it["value"]), it.get("unit")) for it in items))

    def to_json(self) -> str:
        return _dumps({"dims": self.to_list()})

    @classmethod
    def from_json(cls, text: str | bytes) -> "FeatureVector":
        return cls.from_list(json.loads(text)["dims"])


def vector_sub(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    """Componentwise ``a - b``; names and units must match."""
    a.check_compatible(b)
    return a.with_values(x - y for x, y in zip(a.values, b.values))


@dataclass(frozen=True)
class RawRef:
    """Locator for the raw observation: inline bytes or an unresolved URI."""

    data: bytes | None = None
    uri: str | None = None

    def __post_init__(self):
        if (self.data is None) == (self.uri is None):
            raise ValueError("RawRef needs exactly one of data or uri")

    @classmethod
    def inline(cls, data: bytes | str) -> "RawRef":
        return cls(data=data.encode("utf-8") if isinstance(data, str) else bytes(data))

    @property
    def payload(self) -> bytes | str:
        return self.data if self.data is not None else self.uri

    def to_dict(self) -> dict:
        if self.data is not None:
            return {"inline": base64.b64encode(self.data).decode("ascii")}
        return {"uri": self.uri}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> "RawRef | None":
        if d is None:
            return None
        if "inline" in d:
            return cls(data=base64.b64decode(d["inline"]))
        return cls(uri=d["uri"])


@dataclass(frozen=True)
class StateRecord:
    """One observation of an object, located in time or in space."""

    id: str
    features: FeatureVector
    timestamp: float | None = None
    region_label: str | None = None
    raw_ref: RawRef | None = None
    extractor_id: str | None = None

    def __post_init__(self):
        if self.timestamp is None and self.region_label is None and not self.synthetic:
            raise ValueError(f"state {self.id!r} has neither timestamp nor region_label")
        if self.timestamp is not None and not math.isfinite(self.timestamp):
            raise NonFiniteFeature(f"state {self.id!r} has non-finite timestamp")

    @property
    def synthetic(self) -> bool:
        return self.id.startswith("synthetic:")

    @property
    def is_temporal(self) -> bool:
        return self.timestamp is not None

    @property
    def is_spatial(self) -> bool:
        return self.region_label is not None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "timestamp": self.timestamp,
            "region_label": self.region_label,
            "extractor_id": self.extractor_id,
            "raw_ref": self.raw_ref.to_dict() if self.raw_ref else None,
            "dims": self.features.to_list(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StateRecord":
        return cls(
            id=str(d["id"]),
            features=FeatureVector.from_list(d.get("dims", [])),
            timestamp=d.get("timestamp"),
            region_label=d.get("region_label"),
            raw_ref=RawRef.from_dict(d.get("raw_ref")),
            extractor_id=d.get("extractor_id"),
        )

    def to_json(self) -> str:
        return _dumps(self.to_dict())

    @classmethod
    def from_json(cls, line: str) -> "StateRecord":
        return cls.from_dict(json.loads(line))


@dataclass(frozen=True)
class EvidenceRecord:
    source: str
    timestamp: float
    features: FeatureVector

    def __post_init__(self):
        if self.source not in EVIDENCE_SOURCES:
            raise ValueError(f"unknown evidence source {self.source!r}")
        if self.timestamp is None:
            raise ValueError("evidence requires a timestamp")

    def to_dict(self) -> dict:
        return {"source": self.source, "timestamp": self.timestamp,
                "dims": self.features.to_list()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvidenceRecord":
        return cls(str(d["source"]), d["timestamp"], FeatureVector.from_list(d.get("dims", [])))

    def to_json(self) -> str:
        return _dumps(self.to_dict())


@dataclass(frozen=True)
class ExtractorSpec:
    id: str
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)


def _parse_vector_payload(raw: bytes | str) -> FeatureVector:
    try:
        obj = json.loads(raw)
        return FeatureVector.from_list(obj["dims"])
    except NonFiniteFeature:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise UnparseablePayload(f"payload is not a serialized feature vector: {exc}") from None


def extract(raw: bytes | str, spec: ExtractorSpec) -> FeatureVector:
    """Map a raw payload to a feature vector according to ``spec``.

    ``passthrough`` and ``select_dims`` expect a serialized vector
    (``{"dims": [...]}``); ``scripted_table`` looks the payload text up in
    ``spec.params["table"]``.
    """
    if spec.kind == "passthrough":
        return _parse_vector_payload(raw)
    if spec.kind == "select_dims":
        vec = _parse_vector_payload(raw)
        names = list(spec.params.get("names", []))
        missing = [n for n in names if n not in vec.names]
        if missing:
            raise UnparseablePayload(f"payload lacks selected dims {missing}")
        return vec.restrict(names)
    if spec.kind == "scripted_table":
        key = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else str(raw)
        table = spec.params.get("table", {})
        if key.strip() not in table:
            raise UnparseablePayload(f"no table entry for payload {key.strip()!r}")
        return FeatureVector.from_list(table[key.strip()])
    raise UnknownExtractor(f"unknown extractor kind {spec.kind!r}")


class ExtractorRegistry:
    """Configuration-selected set of extractors, keyed by id."""

    def __init__(self, specs: Iterable[ExtractorSpec] = ()):
        self._specs: dict[str, ExtractorSpec] = {}
        self.register(ExtractorSpec("passthrough", "passthrough"))
        for spec in specs:
            self.register(spec)

    def register(self, spec: ExtractorSpec) -> None:
        if spec.kind not in EXTRACTOR_KINDS:
            raise UnknownExtractor(f"unknown extractor kind {spec.kind!r}")
        if spec.id in self._specs and self._specs[spec.id] != spec:
            raise ValueError(f"extractor id {spec.id!r} already registered")
        self._specs[spec.id] = spec

    def get(self, extractor_id: str) -> ExtractorSpec:
        try:
            return self._specs[extractor_id]
        except KeyError:
            raise UnknownExtractor(f"extractor {extractor_id!r} not registered") from None

    def __contains__(self, extractor_id: str) -> bool:
        return extractor_id in self._specs

    def extract(self, raw: bytes | str, extractor_id: str) -> FeatureVector:
        return extract(raw, self.get(extractor_id))

    def make_state(self, id: str, raw: bytes | str, extractor_id: str = "passthrough", *,
                   timestamp: float | None = None, region_label: str | None = None) -> StateRecord:
        """Extract features from an inline payload and record provenance."""
        return StateRecord(
            id=id,
            features=self.extract(raw, extractor_id),
            timestamp=timestamp,
            region_label=region_label,
            raw_ref=RawRef.inline(raw),
            extractor_id=extractor_id,
        )

    def verify(self, state: StateRecord) -> bool:
        """Re-extract an inline payload and compare with the stored features."""
        if state.raw_ref is None or state.raw_ref.data is None or state.extractor_id is None:
            return False
        return self.extract(state.raw_ref.data, state.extractor_id) == state.features
