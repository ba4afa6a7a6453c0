"""Filtering a case week by week: routine observations, direct evidence,
and what-if previews.

Each period the engine advances the position distribution through the
semi-Markov matrix, then corrects it with whatever arrived: filtered
observation intensities, clamped task values, or both. Direct task evidence
overrides the routine signals for the clamped tasks (task sufficiency).
"""

from pathlib import Path

from escalate import EvidenceEvent, load_scenario, new_case, parse_model, step, whatif

ROOT = Path(__file__).resolve().parent.parent
spec = parse_model((ROOT / "models" / "vehicle_attack.json").read_text())
scenario = load_scenario(ROOT / "scenarios" / "escalation.csv")

case = new_case(spec)
print("week  " + "  ".join(f"{sid:>6}" for sid in spec.state_ids) + "   score")
for record in scenario.records:
    case = step(case, record)
    point = case.timeline[-1]
    cells = "  ".join(f"{p:6.3f}" for p in point.posterior)
    print(f"{point.t:>4}  {cells}  {point.score:6.3f}")

print("\nposition score rose from "
      f"{case.timeline[0].score:.3f} to {case.timeline[-1].score:.3f} over 24 weeks")

print("\n=== what-if: confirmed movement to a target location next week ===")
preview = whatif(
    case,
    [(None, EvidenceEvent(t=25, tasks={"t_move_to_target": 1, "t_reconnoitre_targets": 1}))],
)
m = spec.state_index("M")
print(f"Mobilised now:              {preview[0].posterior[m]:.3f}")
print(f"Mobilised under the clamp:  {preview[-1].posterior[m]:.3f}")
print(f"committed history unchanged: {case.timeline[-1].t == 24}")

print("\n=== then the evidence really arrives ===")
case = step(case, evidence=EvidenceEvent(t=25, tasks={"t_move_to_target": 1}, note="surveillance sighting"))
print(f"Mobilised committed:        {case.timeline[-1].posterior[m]:.3f}")
print(f"events journaled:           {len(case.events)}")
