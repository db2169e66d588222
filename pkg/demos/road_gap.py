"""Two frames of a road: the gap ahead shrinks from 30 m to 15 m.

Walks through the temporal delta, the threshold detector and a
difference-first prompt rendered for a scripted backend.

    python demos/road_gap.py
"""

from diffguide import (
    BackendSpec,
    FeatureVector,
    RawRef,
    StateRecord,
    build_prompt,
    complete,
    detect_threshold,
    temporal_delta,
)


def frame(id, t, gap, speed):
    fv = FeatureVector.of(("gap_m", gap, "m"), ("ego_speed", speed, "m/s"))
    return StateRecord(id, fv, timestamp=t, raw_ref=RawRef(uri=f"file:///frames/{id}.png"),
                       extractor_id="passthrough")


before = frame("t0", 0.0, 30.0, 12.0)
after = frame("t1", 1.0, 15.0, 12.0)

d = temporal_delta(before, after)
print("delta:", dict(zip(d.delta.names, d.delta.values)))
print("magnitude:", d.magnitude)

for theta in (10.0, 15.0, 20.0):
    v = detect_threshold(d, theta)
    print(f"theta={theta:>5}: {'abnormal' if v.abnormal else 'normal'}")

prompt = build_prompt("difference", {"differences": [d],
                                     "attachments": ["file:///frames/t0.png",
                                                     "file:///frames/t1.png"]},
                      template_id="difference.computed")
print("\nprompt:\n" + prompt.text())

backend = BackendSpec.mock([{"template_id": prompt.template_id, "trial": "*",
                             "response": "The car ahead is much closer in the second picture."}])
print("\nreply:", complete(prompt, backend).text)
