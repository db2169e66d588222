"""State builders shared by the tests."""

import json

from diffguide import FeatureVector, RawRef, StateRecord


def gap_payload(gap):
    return json.dumps({"dims": [{"name": "gap_m", "value": gap, "unit": "m"}]})


def tstate(id, t, *values, names=None, unit=None):
    """Timestamped state with inline payload equal to its serialized vector."""
    fv = FeatureVector.from_values(values, names, unit)
    return StateRecord(id, fv, timestamp=t, raw_ref=RawRef.inline(fv.to_json()),
                       extractor_id="passthrough")


def rstate(id, region, *values, names=None):
    fv = FeatureVector.from_values(values, names)
    return StateRecord(id, fv, region_label=region, raw_ref=RawRef.inline(fv.to_json()),
                       extractor_id="passthrough")


def gap_state(id, t, gap):
    return tstate(id, t, gap, names=["gap_m"], unit="m")
