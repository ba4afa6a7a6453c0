"""Sensitivity of the posterior evolution to priors and holding rates.

Prior shifts add a delta to one state and renormalise proportionally;
extreme settings pin one state and spread the remainder equally. Holding
sweeps rebuild the model with a different per-period transition probability.
Sweep points run on a worker pool and results keep their declared order.
"""

from pathlib import Path

from escalate import SweepSpec, load_scenario, parse_model
from escalate.scenarios import checkpoint_rows, prior_sensitivity, zeta_sensitivity

ROOT = Path(__file__).resolve().parent.parent
spec = parse_model((ROOT / "models" / "vehicle_attack.json").read_text())
scenario = load_scenario(ROOT / "scenarios" / "escalation.csv")


def show(results, title):
    print(f"\n=== {title} ===")
    print(f"{'setting':>8} {'t':>4}  " + "  ".join(f"{s:>6}" for s in spec.state_ids))
    for result in results:
        for row in checkpoint_rows(result.timeline, result.spec, every=10):
            cells = "  ".join(f"{p:6.3f}" for p in row[1:-1])
            print(f"{str(result.setting):>8} {row[0]:>4}  {cells}")


show(
    prior_sensitivity(spec, scenario, SweepSpec(target="prior:N", settings=(0.0, 0.3))),
    "shift the Neutral prior by +0.3, then renormalise",
)
show(
    prior_sensitivity(spec, scenario, SweepSpec(target="prior:M", settings=(0.962,), rule="set")),
    "extreme prior: pin Mobilised at 0.962",
)
show(
    zeta_sensitivity(spec, scenario, (0.001, 0.01, 0.1, 0.5)),
    "holding-rate sweep (prior rows identical by construction)",
)
