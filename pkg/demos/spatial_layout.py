"""How uneven is a scene? Compare three sub-regions of one image.

Pairwise differences between regions, the variability score, and the
two regions that differ the most.

    python demos/spatial_layout.py
"""

from diffguide import (
    FeatureVector,
    StateRecord,
    pairwise_spatial_differences,
    select_main_differences,
    spatial_variability,
)

lanes = {"left": (3.5, 0.2), "centre": (3.6, 0.8), "right": (2.9, 0.3)}
regions = [StateRecord(f"lane:{k}", FeatureVector.of(("lane_width", w, "m"),
                                                      ("traffic_density", rho, None)),
                       region_label=k)
           for k, (w, rho) in lanes.items()]

print("variability:", round(spatial_variability(regions), 6))
# both orderings of a pair have the same magnitude; keep one of each
diffs = [d for d in pairwise_spatial_differences(regions) if d.from_id < d.to_id]
for d in select_main_differences(diffs, 2):
    print(f"{d.from_id} vs {d.to_id}: magnitude {d.magnitude:.4f}")

# a perfectly uniform road scores zero
flat = [StateRecord(f"u{i}", regions[0].features, region_label=f"u{i}") for i in range(3)]
print("uniform variability:", spatial_variability(flat))
