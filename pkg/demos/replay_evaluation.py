"""Replay the recorded Direct vs. Difference trials and print the report.

Uses the scripted backend and embedding table under scenarios/, so it
runs offline and gives the same numbers every time.

    python demos/replay_evaluation.py
"""

from pathlib import Path

from diffguide import Scenario, make_report, run_trials

scenarios = Path(__file__).resolve().parent.parent / "scenarios"

for name in ("temporal", "spatial"):
    scenario = Scenario.load(scenarios / f"{name}.toml")
    report = make_report(run_trials(scenario), scenario.alpha, scenario.name)
    print(f"== {name}")
    for method, s in report.methods.items():
        print(f"  {method:>10}: mean {s.mean:.4f}  max {s.max:.4f} (trial {s.argmax + 1})"
              f"  min {s.min:.4f} (trial {s.argmin + 1})")
    verdict = "reject" if report.reject_null else "keep"
    print(f"  t={report.t_statistic:.3f} dof={report.degrees_of_freedom:.1f} "
          f"p={report.p_value:.2e} -> {verdict} H0 at alpha={report.alpha}")
