"""Parsing, validating, and reshaping model documents.

A model document is a single JSON file declaring the latent escalation
states, their transition structure, the binary task layer, and the
observable layer. This walkthrough loads the shipped vehicle-attack model,
pokes at its structure, and derives coarser/finer variants.
"""

from pathlib import Path

from escalate import ChildState, coarsen, parse_model, refine, validate_model

ROOT = Path(__file__).resolve().parent.parent

spec = parse_model((ROOT / "models" / "vehicle_attack.json").read_text())

print("=== model ===")
print(f"label:   {spec.label}")
print(f"states:  {', '.join(f'{s.id} ({s.name})' for s in spec.states)}")
print(f"priors:  {dict(zip(spec.state_ids, spec.priors))}")
print(f"tasks:   {len(spec.tasks)}, observables: {len(spec.observables)}")

print("\n=== per-state task portfolios ===")
for sid in spec.active_ids:
    tasks = [t for t, _pol in spec.incident_tasks(sid)]
    print(f"{sid}: {', '.join(tasks)}")

print("\n=== edge structure (explicit + implied neutral) ===")
for sid in spec.active_ids:
    edges = {e.dst: e.prob for e in spec.explicit_edges_from(sid)}
    edges[spec.neutral_id] = round(spec.implied_neutral_prob(sid), 6)
    print(f"{sid} -> {edges}")

report = validate_model(spec)
print(f"\nvalidation: {'clean' if report.ok else report.errors}")

print("\n=== coarsening: collapse Training into Preparing ===")
coarse = coarsen(spec, {"A": "A", "T": "P", "P": "P", "M": "M"})
print(f"states:  {coarse.state_ids}")
print(f"priors:  {dict(zip(coarse.state_ids, (round(p, 4) for p in coarse.priors)))}")
print(f"merged P tasks: {[t for t, _ in coarse.incident_tasks('P')]}")

print("\n=== refinement: split Preparing by attack method ===")
parent_tasks = tuple(t for t, _ in spec.incident_tasks("P"))
fine = refine(
    spec,
    "P",
    [
        ChildState(id="PV", name="PreparingVehicle", prior_fraction=0.5, tasks=parent_tasks),
        ChildState(id="PB", name="PreparingBomb", prior_fraction=0.5, tasks=parent_tasks),
    ],
)
print(f"states:  {fine.state_ids}")
print(f"priors:  {dict(zip(fine.state_ids, (round(p, 4) for p in fine.priors)))}")
print(f"still valid: {validate_model(fine).ok}")
