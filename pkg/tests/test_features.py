import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffguide import (
    ExtractorRegistry,
    ExtractorSpec,
    FeatureVector,
    RawRef,
    StateRecord,
    extract,
    vector_sub,
)
from diffguide.errors import (
    IncompatibleVectors,
    NonFiniteFeature,
    UnknownExtractor,
    UnparseablePayload,
)

from .helpers import gap_payload

PASS = ExtractorSpec("passthrough", "passthrough")

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_extract_passthrough_road_example():
    assert extract(gap_payload(30), PASS) == FeatureVector.of(("gap_m", 30, "m"))
    assert extract(gap_payload(15), PASS) == FeatureVector.of(("gap_m", 15, "m"))


def test_extract_empty_dims():
    fv = extract('{"dims": []}', PASS)
    assert len(fv) == 0
    assert fv.is_compatible(FeatureVector())
    assert not fv.is_compatible(FeatureVector.of(("a", 1)))


def test_extract_errors():
    with pytest.raises(UnparseablePayload):
        extract(b"not json", PASS)
    with pytest.raises(NonFiniteFeature):
        extract('{"dims": [{"name": "a", "value": NaN}]}', PASS)
    with pytest.raises(UnknownExtractor):
        extract(gap_payload(1), ExtractorSpec("x", "vision"))
    with pytest.raises(UnknownExtractor):
        ExtractorRegistry().get("missing")


def test_select_dims_and_scripted_table():
    payload = json.dumps({"dims": [{"name": "a", "value": 1}, {"name": "b", "value": 2}]})
    sel = ExtractorSpec("only_b", "select_dims", {"names": ["b"]})
    assert extract(payload, sel) == FeatureVector.of(("b", 2))
    with pytest.raises(UnparseablePayload):
        extract(payload, ExtractorSpec("bad", "select_dims", {"names": ["c"]}))
    table = ExtractorSpec("road", "scripted_table",
                          {"table": {"img0": [{"name": "gap_m", "value": 30, "unit": "m"}]}})
    assert extract(b"img0", table) == FeatureVector.of(("gap_m", 30, "m"))
    with pytest.raises(UnparseablePayload):
        extract(b"img9", table)


def test_registry_provenance_roundtrip():
    reg = ExtractorRegistry([ExtractorSpec("road", "scripted_table",
                                           {"table": {"img0": [{"name": "g", "value": 3}]}})])
    s = reg.make_state("s0", b"img0", "road", timestamp=0)
    assert s.extractor_id == "road" and s.raw_ref.data == b"img0"
    assert reg.verify(s)
    forged = StateRecord("s1", FeatureVector.of(("g", 4)), timestamp=1, raw_ref=s.raw_ref,
                         extractor_id="road")
    assert not reg.verify(forged)


def test_vector_sub_examples():
    assert vector_sub(FeatureVector.of(("gap_m", 30)), FeatureVector.of(("gap_m", 15))) \
        == FeatureVector.of(("gap_m", 15))
    a = FeatureVector.of(("a", 1), ("b", 2))
    b = FeatureVector.of(("a", 4), ("b", 6))
    assert vector_sub(a, b) == FeatureVector.of(("a", -3), ("b", -4))
    assert vector_sub(a, a).is_zero()


def test_vector_sub_incompatible():
    with pytest.raises(IncompatibleVectors):
        vector_sub(FeatureVector.of(("a", 1)), FeatureVector.of(("b", 1)))
    with pytest.raises(IncompatibleVectors):
        vector_sub(FeatureVector.of(("a", 1), ("b", 2)), FeatureVector.of(("b", 2), ("a", 1)))
    # same name, different unit: no silent conversion
    with pytest.raises(IncompatibleVectors):
        vector_sub(FeatureVector.of(("gap", 1, "m")), FeatureVector.of(("gap", 1, "km")))


def test_invariants_rejected():
    with pytest.raises(IncompatibleVectors):
        FeatureVector.of(("a", 1), ("a", 2))
    with pytest.raises(NonFiniteFeature):
        FeatureVector.of(("a", math.inf))
    with pytest.raises(ValueError):
        StateRecord("s", FeatureVector())


def test_state_canonical_key_order():
    s = StateRecord("s0", FeatureVector.of(("gap_m", 30, "m")), timestamp=0,
                    raw_ref=RawRef(uri="file:///img0.png"), extractor_id="passthrough")
    assert list(json.loads(s.to_json())) == [
        "id", "timestamp", "region_label", "extractor_id", "raw_ref", "dims"]
    assert "\n" not in s.to_json()
    assert StateRecord.from_json(s.to_json()) == s


@given(st.lists(finite, min_size=1, max_size=6), st.data())
def test_sub_antisymmetric(xs, data):
    ys = data.draw(st.lists(finite, min_size=len(xs), max_size=len(xs)))
    a, b = FeatureVector.from_values(xs), FeatureVector.from_values(ys)
    assert vector_sub(a, b).values == tuple(-v for v in vector_sub(b, a).values)
    assert vector_sub(a, a).is_zero()


@given(st.lists(finite, max_size=6))
def test_extract_deterministic(xs):
    payload = FeatureVector.from_values(xs).to_json()
    assert extract(payload, PASS).to_json() == extract(payload, PASS).to_json() == payload
