"""Long-run mobilisation diagnostics.

With neutral as the only absorbing state, every trajectory eventually drains
there. Making the terminal stage absorbing as well splits the long run
between "dropped out" and "mobilised"; sweeping the per-period drop-out rate
shows how strongly it protects against eventual mobilisation.
"""

from pathlib import Path

from escalate import parse_model
from escalate.scenarios import longrun_report

ROOT = Path(__file__).resolve().parent.parent
spec = parse_model((ROOT / "models" / "vehicle_attack.json").read_text())

print("=== single absorbing state: everything drains to neutral ===")
report = longrun_report(spec)
print(f"converged after {report.steps} periods")
print("terminal:", {s: round(p, 9) for s, p in zip(report.states, report.terminal)})

print("\n=== two absorbing states: neutral vs mobilised ===")
report = longrun_report(spec, mobilised_absorbing=True)
print(f"converged after {report.steps} periods")
print("terminal:", {s: round(p, 6) for s, p in zip(report.states, report.terminal)})

print("\n=== sweep: per-period transient-to-neutral probability 0.01 -> 0.99 ===")
report = longrun_report(spec, mobilised_absorbing=True, neutral_rate_sweep=(0.01, 0.99, 8))
print(f"{'rate':>6} {'terminal N':>12} {'terminal M':>12}")
for rate, neutral, absorbed in report.sweep:
    print(f"{rate:6.2f} {neutral:12.6f} {absorbed:12.6f}")
print("terminal neutral mass is monotone non-decreasing in the drop-out rate")
