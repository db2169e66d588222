"""Keep a history of gaps, learn a threshold from it, then judge new frames.

    python demos/history_anomaly.py
"""

import tempfile
from pathlib import Path

from diffguide import (
    FeatureVector,
    HistoryStore,
    RawRef,
    StateRecord,
    compare_with_history,
    detect_history,
    estimate_threshold,
    select_reference,
)
from diffguide.anomaly import history_magnitudes


def gap(id, t, metres):
    fv = FeatureVector.of(("gap_m", metres, "m"))
    return StateRecord(id, fv, timestamp=t, raw_ref=RawRef.inline(fv.to_json()))


gaps = [30, 29, 31, 30, 28, 29, 30, 31]
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "history.jsonl"
    with HistoryStore(path) as store:
        for t, g in enumerate(gaps):
            store.append(gap(f"t{t}", t, g), "normal")

    store = HistoryStore(path, writer=False)
    mags, labels = history_magnitudes(store)
    theta = estimate_threshold(mags, k_sigma=3, labels=labels)
    print(f"step magnitudes {mags}")
    print(f"learned theta = {theta:.3f}")

    for strategy in ("latest", "mean", "medoid"):
        ref = select_reference(store, strategy)
        print(f"{strategy:>6} reference: {ref.id} gap={ref.features['gap_m']:.3f}")

    now = gap("t8", 8, 12)
    d = compare_with_history(now, store, "medoid")
    print(f"gap now vs medoid: {d.delta['gap_m']:+.1f} m, "
          f"{'abnormal' if d.magnitude > theta else 'normal'}")
    v = detect_history(now, store, eta=3.0)
    print(f"nearest normal state is {v.statistic:.1f} m away -> "
          f"{'abnormal' if v.abnormal else 'normal'}")
