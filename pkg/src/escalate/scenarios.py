"""Batch scenario execution, sensitivity sweeps, structure-robustness
comparisons, and long-run reports.

Scenario files are observation streams (CSV or JSON-lines, one record per
period, keyed by observable id plus ``t``, blank cell = missing); JSON-lines
streams may also carry direct task evidence. Sweeps rebuild the model per
setting and run on a bounded worker pool, preserving declared ordering.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import (
    EvidenceEvent,
    TimelinePoint,
    new_case,
    step,
)
from .errors import ModelFormatError
from .intensity import ObservationRecord
from .model import ModelSpec, require_valid, validate_model
from .transition import (
    DEFAULT_HORIZON_CAP,
    build_transition_matrix,
    evolve_to_convergence,
    make_absorbing,
    with_neutral_rate,
)

SWEEP_WORKERS = 8


@dataclass(frozen=True)
class Scenario:
    """Ordered observation records plus optional direct task evidence."""

    label: str
    records: tuple[ObservationRecord, ...]
    evidence: tuple[EvidenceEvent, ...] = ()
    model: str = ""


def validate_scenario(scenario: Scenario, spec: ModelSpec) -> None:
    """Strictly increasing timestamps per stream; every id resolves."""
    for stream in (scenario.records, scenario.evidence):
        ts = [e.t for e in stream]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"scenario {scenario.label!r}: timestamps not strictly increasing")
    known_obs = {o.id for o in spec.observables}
    for record in scenario.records:
        unknown = set(record.values) - known_obs
        if unknown:
            raise ValueError(f"scenario {scenario.label!r}: unknown observables {sorted(unknown)}")
    known_tasks = set(spec.task_ids)
    for ev in scenario.evidence:
        unknown = set(ev.tasks) - known_tasks
        if unknown:
            raise ValueError(f"scenario {scenario.label!r}: unknown tasks {sorted(unknown)}")


def scenario_steps(scenario: Scenario):
    """Merge the record and evidence streams into per-period step arguments,
    pairing same-period entries."""
    by_t: dict[float, list] = {}
    for record in scenario.records:
        by_t.setdefault(record.t, [None, None])[0] = record
    for ev in scenario.evidence:
        by_t.setdefault(ev.t, [None, None])[1] = ev
    return [(t, pair[0], pair[1]) for t, pair in sorted(by_t.items())]


def run_scenario(spec: ModelSpec, scenario: Scenario) -> tuple[TimelinePoint, ...]:
    """Step a fresh case through the scenario; returns the full timeline."""
    require_valid(spec)
    validate_scenario(scenario, spec)
    case = new_case(spec)
    for _t, record, evidence in scenario_steps(scenario):
        case = step(case, record, evidence)
    return case.timeline


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


def _parse_number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ModelFormatError(f"not a number: {text!r}") from None


def load_scenario_csv(text: str, label: str = "") -> Scenario:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or "t" not in reader.fieldnames:
        raise ModelFormatError("scenario CSV needs a 't' column")
    records = []
    for row in reader:
        t = _parse_number(row.pop("t"))
        values = {
            key: _parse_number(cell)
            for key, cell in row.items()
            if cell is not None and cell.strip() != ""
        }
        records.append(ObservationRecord(t=t, values=values))
    return Scenario(label=label, records=tuple(records))


def load_scenario_jsonl(text: str, label: str = "") -> Scenario:
    records = []
    evidence = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"scenario line {lineno}: {exc.msg}", position=(lineno, exc.colno))
        if "t" not in entry:
            raise ModelFormatError(f"scenario line {lineno}: missing 't'")
        t = entry["t"]
        if "values" in entry:
            values = {k: v for k, v in entry["values"].items() if v is not None}
            records.append(ObservationRecord(t=t, values=values))
        if "tasks" in entry:
            evidence.append(EvidenceEvent(t=t, tasks=dict(entry["tasks"]), note=entry.get("note", "")))
        if "values" not in entry and "tasks" not in entry:
            raise ModelFormatError(f"scenario line {lineno}: needs 'values' or 'tasks'")
    return Scenario(label=label, records=tuple(records), evidence=tuple(evidence))


def load_scenario(path) -> Scenario:
    from pathlib import Path

    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() in (".jsonl", ".ndjson"):
        return load_scenario_jsonl(text, label=p.stem)
    return load_scenario_csv(text, label=p.stem)


# ---------------------------------------------------------------------------
# Sensitivity sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter and its settings.

    ``target`` is ``prior:<state>``, ``prior:equal``, ``zeta``, or
    ``zeta:<state>``. For prior targets the settings are shifts under the
    ``shift`` rule (add, then renormalise) or absolute values under ``set``
    (others share the remainder equally).
    """

    target: str
    settings: tuple[float, ...]
    rule: str = "shift"


@dataclass(frozen=True)
class SweepResult:
    setting: float | str
    spec: ModelSpec
    timeline: tuple[TimelinePoint, ...]


def shifted_priors(spec: ModelSpec, state_id: str, delta: float) -> tuple[float, ...]:
    """Add ``delta`` to one state's prior, then renormalise proportionally."""
    idx = spec.state_index(state_id)
    raw = list(spec.priors)
    raw[idx] += delta
    if raw[idx] < 0:
        raise ValueError(f"shift {delta} drives the {state_id} prior negative")
    total = math.fsum(raw)
    if total <= 0:
        raise ValueError("shifted priors cannot be renormalised")
    return tuple(p / total for p in raw)


def set_prior(spec: ModelSpec, state_id: str, value: float) -> tuple[float, ...]:
    """Pin one state's prior; the rest share the remainder equally."""
    if not (0.0 < value < 1.0):
        raise ValueError(f"prior must be in (0,1), got {value}")
    idx = spec.state_index(state_id)
    share = (1.0 - value) / (len(spec.states) - 1)
    return tuple(value if i == idx else share for i in range(len(spec.states)))


def equal_priors(spec: ModelSpec) -> tuple[float, ...]:
    n = len(spec.states)
    return tuple(1.0 / n for _ in range(n))


def _run_settings(entries, scenario):
    def one(entry):
        setting, variant = entry
        return SweepResult(setting=setting, spec=variant, timeline=run_scenario(variant, scenario))

    with ThreadPoolExecutor(max_workers=min(SWEEP_WORKERS, max(1, len(entries)))) as pool:
        return list(pool.map(one, entries))


def prior_sensitivity(spec: ModelSpec, scenario: Scenario, sweep: SweepSpec) -> list[SweepResult]:
    """One timeline per prior setting; the base model is untouched."""
    if not sweep.target.startswith("prior"):
        raise ValueError(f"prior_sensitivity needs a prior target, got {sweep.target!r}")
    entries = []
    if sweep.target == "prior:equal":
        entries.append(("equal", replace(spec, priors=equal_priors(spec))))
    else:
        _, _, state_id = sweep.target.partition(":")
        spec.state_index(state_id)  # raises on unknown state
        for setting in sweep.settings:
            if sweep.rule == "set":
                priors = set_prior(spec, state_id, setting)
            elif sweep.rule == "shift":
                priors = shifted_priors(spec, state_id, setting)
            else:
                raise ValueError(f"unknown prior rule {sweep.rule!r}")
            entries.append((setting, replace(spec, priors=priors)))
    for _setting, variant in entries:
        report = validate_model(variant)
        if not report.ok:
            raise ValueError(f"sweep setting produces an invalid model: {report.errors}")
    return _run_settings(entries, scenario)


def zeta_sensitivity(
    spec: ModelSpec,
    scenario: Scenario,
    settings,
    state_id: str | None = None,
) -> list[SweepResult]:
    """One timeline per holding-parameter setting (global, or one state's)."""
    entries = []
    for zeta in settings:
        if not (0.0 < zeta < 1.0):
            raise ValueError(f"holding parameter must be in (0,1), got {zeta}")
        if state_id is None:
            holding = tuple(zeta for _ in spec.active_ids)
        else:
            idx = spec.state_index(state_id) - 1
            holding = tuple(
                zeta if i == idx else z for i, z in enumerate(spec.holding_params)
            )
        entries.append((zeta, replace(spec, holding_params=holding)))
    return _run_settings(entries, scenario)


def checkpoint_rows(timeline, spec: ModelSpec, every: int = 5):
    """Exact sub-sample of a timeline: period 0, every ``every``-th period,
    and the final period."""
    ts = [point.t for point in timeline]
    picked = {ts[0], ts[-1]}
    picked.update(t for i, t in enumerate(ts) if i % every == 0)
    return [
        [point.t, *point.posterior, point.score]
        for point in timeline
        if point.t in picked
    ]


# ---------------------------------------------------------------------------
# Structure robustness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureDiff:
    """Per-period signed probability differences, variant minus (mapped,
    summed) base, keyed by variant state id."""

    states: tuple[str, ...]
    t: tuple[float, ...]
    diffs: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def max_abs(self) -> float:
        return max((max(abs(d) for d in series) for series in self.diffs.values()), default=0.0)


def structure_robustness(
    base: ModelSpec,
    variants,
    scenario: Scenario,
    mappings=None,
) -> list[StructureDiff]:
    """Run the scenario on the base and each variant and difference the
    matched state probabilities.

    ``mappings[i]`` maps base state ids to variant state ids (identity by
    default); merged variant states are compared against the sum of their
    mapped base states. Variants must share the base's observables.
    """
    mappings = mappings or [None] * len(variants)
    if len(mappings) != len(variants):
        raise ValueError("one mapping per variant (or None)")
    base_timeline = run_scenario(base, scenario)
    out = []
    for variant, mapping in zip(variants, mappings):
        if {o.id for o in variant.observables} != {o.id for o in base.observables}:
            raise ValueError("variant does not share the base model's observables")
        mapping = dict(mapping) if mapping else {}
        for sid in base.state_ids:
            mapping.setdefault(sid, sid)
        unmatched = [sid for sid, target in mapping.items() if target not in variant.state_ids]
        if unmatched:
            raise ValueError(f"no mapping into the variant for base states {unmatched}")
        variant_timeline = run_scenario(variant, scenario)
        if len(variant_timeline) != len(base_timeline):
            raise ValueError("base and variant timelines have different lengths")
        diffs = {}
        for vid in variant.state_ids:
            vi = variant.state_index(vid)
            members = [base.state_index(b) for b, target in mapping.items() if target == vid]
            series = []
            for bp, vp in zip(base_timeline, variant_timeline):
                series.append(vp.posterior[vi] - math.fsum(bp.posterior[m] for m in members))
            diffs[vid] = tuple(series)
        out.append(
            StructureDiff(
                states=variant.state_ids,
                t=tuple(point.t for point in variant_timeline),
                diffs=diffs,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Long-run reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LongrunReport:
    variant: str
    states: tuple[str, ...]
    steps: int
    converged: bool
    terminal: tuple[float, ...]
    trajectory: np.ndarray
    sample_every: int
    sweep: tuple[tuple[float, float, float], ...] = ()  # (rate, neutral, absorbed)


def longrun_report(
    spec: ModelSpec,
    horizon: int = DEFAULT_HORIZON_CAP,
    mobilised_absorbing: bool = False,
    absorb_state: str | None = None,
    neutral_rate_sweep=None,
) -> LongrunReport:
    """Evolve the priors to convergence (or the horizon cap).

    With ``mobilised_absorbing`` the terminal-stage state (last declared by
    default) becomes a second absorbing state; an optional sweep then
    reports terminal (neutral, absorbed) masses while directly setting every
    transient state's per-period transition-to-neutral probability.
    """
    require_valid(spec)
    tm = build_transition_matrix(spec)
    variant = "single-absorbing"
    absorbed_idx = None
    if mobilised_absorbing:
        absorb_state = absorb_state or spec.state_ids[-1]
        absorbed_idx = spec.state_index(absorb_state)
        tm = make_absorbing(tm, absorb_state)
        variant = f"absorbing:{absorb_state}"
    result = evolve_to_convergence(spec.priors, tm, cap=horizon)

    sweep_rows = []
    if neutral_rate_sweep is not None:
        if not mobilised_absorbing:
            raise ValueError("the neutral-rate sweep needs the two-absorbing variant")
        lo, hi, n = neutral_rate_sweep
        for rate in np.linspace(lo, hi, int(n)):
            swept = with_neutral_rate(tm, float(rate))
            term = evolve_to_convergence(spec.priors, swept, cap=horizon).terminal
            sweep_rows.append((float(rate), float(term[0]), float(term[absorbed_idx])))

    return LongrunReport(
        variant=variant,
        states=spec.state_ids,
        steps=result.steps,
        converged=result.converged,
        terminal=tuple(float(x) for x in result.terminal),
        trajectory=result.trajectory,
        sample_every=result.sample_every,
        sweep=tuple(sweep_rows),
    )
