"""Regenerate the recorded-replay scenario fixtures in this directory.

Each scenario replays 20 scripted replies per method through the mock
backend. The ``table`` embedding provider maps every reply to the 2-d unit
vector ``(s, sqrt(1 - s^2))`` and the reference statement to ``(1, 0)``,
so the cosine similarity of a reply is exactly its frozen score ``s``.
The score lists reproduce the reported per-method means and extrema.

    python scenarios/build_replay.py
"""

import json
import math
from pathlib import Path

HERE = Path(__file__).parent

TEMPORAL = {
    "reference": (
        "The distance between the red car and the vehicle ahead is decreasing, and there are "
        "more vehicles in front. It is recommended to slow down immediately to maintain a safe "
        "following distance."),
    "attachments": ["fixtures/road_t0.png", "fixtures/road_t1.png"],
    "direct": [0.2955, 0.5141, 0.4303, 0.3109, 0.3587, 0.4514, 0.5094, 0.441, 0.4738, 0.5546,
               0.4967, 0.3952, 0.2733, 0.4833, 0.4692, 0.5858, 0.3162, 0.3008, 0.4885, 0.4033],
    "difference": [0.5157, 0.5638, 0.6119, 0.5411, 0.5464, 0.5377, 0.5985, 0.5344, 0.6491,
                   0.6358, 0.5606, 0.5651, 0.5688, 0.5795, 0.511, 0.5755, 0.5695, 0.6365,
                   0.6106, 0.6085],
    "replies": {
        "direct": "The picture shows a busy road with a red car, trees and buildings along the side",
        "difference": "In the second picture the red car is closer to the vehicle ahead and more "
                      "cars appear in front, so the driver should slow down",
    },
}

SPATIAL = {
    "reference": (
        "The carriages of the train vary in size, primarily due to the non-uniform seating "
        "layout across different cars. Some carriages are arranged with forward-facing rows, "
        "while others feature face-to-face seating, resulting in differences in interior space. "
        "This type of train is commonly used in airport metro lines."),
    "attachments": ["fixtures/metro_schematic.png"],
    "direct": [0.5921, 0.5071, 0.5167, 0.5954, 0.6496, 0.4348, 0.4275, 0.4741, 0.5214, 0.4519,
               0.5447, 0.5503, 0.6568, 0.6035, 0.4749, 0.6141, 0.6191, 0.5863, 0.5855, 0.4902],
    "difference": [0.5775, 0.6192, 0.6634, 0.616, 0.7684, 0.6073, 0.6772, 0.7625, 0.7735,
                   0.6783, 0.7524, 0.7519, 0.7267, 0.7218, 0.6892, 0.69, 0.7391, 0.6598,
                   0.7615, 0.7483],
    "replies": {
        "direct": "The drawing shows a metro train running on a track next to a platform",
        "difference": "Yes, the carriages have different lengths because their seating layouts "
                      "differ between forward-facing rows and face-to-face seats",
    },
}


def build(name: str, data: dict) -> None:
    script, table = [], {data["reference"]: [1.0, 0.0]}
    for method in ("direct", "difference"):
        for k, s in enumerate(data[method]):
            text = f"[{method} reply {k + 1:02d}] {data['replies'][method]}."
            script.append({"template_id": f"{name}.{method}", "trial": k, "response": text})
            table[text] = [s, math.sqrt(1.0 - s * s)]
    with open(HERE / f"{name}_script.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for entry in script:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
    (HERE / f"{name}_embeddings.json").write_text(json.dumps(table, indent=1) + "\n",
                                                   encoding="utf-8")
    attachments = ", ".join(json.dumps(a) for a in data["attachments"])
    (HERE / f"{name}.toml").write_text(f'''name = "{name}"
reference = {json.dumps(data["reference"])}
attachments = [{attachments}]
n_trials = 20
alpha = 0.05

[methods]
direct = "{name}.direct"
difference = "{name}.difference"

[backend]
kind = "mock"
model_name = "replay"
script_file = "{name}_script.jsonl"

[provider]
kind = "table"
table_file = "{name}_embeddings.json"
''', encoding="utf-8")
    (HERE / f"{name}_expected.json").write_text(json.dumps(
        {"direct": data["direct"], "difference": data["difference"]}, indent=1) + "\n",
        encoding="utf-8")


if __name__ == "__main__":
    build("temporal", TEMPORAL)
    build("spatial", SPATIAL)
