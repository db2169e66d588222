"""Fuse camera features with external evidence before differencing.

The fused difference agrees with the camera-only one on the camera
dimensions and adds the evidence dimensions on top.

    python demos/evidence_fusion.py
"""

from diffguide import (
    EvidenceRecord,
    FeatureVector,
    StateRecord,
    external_difference,
    fuse,
    internal_difference,
)

prev = StateRecord("t0", FeatureVector.of(("gap_m", 30.0, "m")), timestamp=0)
cur = StateRecord("t1", FeatureVector.of(("gap_m", 22.0, "m")), timestamp=1)
radar = lambda t, v: EvidenceRecord("sensor", t, FeatureVector.of(("closing_speed", v, "m/s")))
report = lambda t, v: EvidenceRecord("user", t, FeatureVector.of(("braking", v, None)))

print("fused vector:", fuse(cur, [radar(1, 4.0), report(1, 1.0)]).fused.names)

inner = internal_difference(cur, prev)
outer = external_difference(cur, [radar(1, 4.0), report(1, 1.0)],
                            prev, [radar(0, 0.5), report(0, 0.0)])
print("internal:", dict(zip(inner.delta.names, inner.delta.values)), round(inner.magnitude, 4))
print("external:", dict(zip(outer.delta.names, outer.delta.values)), round(outer.magnitude, 4))
assert outer.delta.restrict(inner.delta.names) == inner.delta
