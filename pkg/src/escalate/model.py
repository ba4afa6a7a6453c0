"""Model documents: parsing, validation, serialization, and structural
coarsening/refinement.

A model document is a single self-describing JSON object (``format: 1``)
declaring the latent states, their transition edges and holding parameters,
the binary task layer with its per-state incidence and elicitation
probabilities, and the observable layer feeding the task intensities.
``parse_model`` turns a document into an immutable :class:`ModelSpec`;
``validate_model`` checks every numerical invariant and returns a
:class:`ValidationReport`.

State index 0 is always the neutral (absorbing, no-threat) state. Edge
probabilities out of an active state may sum to less than one; the remainder
is the implied transition into the neutral state and is computed, never
stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .errors import InvalidModelError, ModelFormatError

FORMAT_VERSION = 1

POSITIVE = 1
NEGATIVE = -1

DEFAULT_X0 = 1.0
DEFAULT_K0 = 1.0
DEFAULT_K1 = 5.0

P_PLUS_FLOOR = 0.2

LIKELIHOOD_MODES = ("average", "product")


@dataclass(frozen=True)
class StateDef:
    id: str
    name: str


@dataclass(frozen=True)
class EdgeDef:
    src: str
    dst: str
    prob: float


@dataclass(frozen=True)
class TaskDef:
    id: str
    name: str
    evidence_only: bool = False


@dataclass(frozen=True)
class ObservableDef:
    id: str
    name: str
    mean: float
    std: float


@dataclass(frozen=True)
class LogisticParams:
    """Shift and growth rates of the asymmetric logistic likelihood."""

    x0: float = DEFAULT_X0
    k0: float = DEFAULT_K0
    k1: float = DEFAULT_K1


@dataclass(frozen=True)
class ModelSpec:
    """Complete immutable description of one escalation model.

    All aligned tuples follow declaration order: ``priors`` and
    ``score_weights`` align with ``states``; ``neutral_task_probs`` and
    ``likelihood_params`` align with ``tasks``; ``p_plus`` and
    ``holding_params`` align with the active states ``states[1:]``.
    ``task_state_incidence`` holds ``(task_id, state_id, polarity)`` triples
    with polarity ``POSITIVE`` or ``NEGATIVE``;
    ``observable_task_incidence`` holds ``(observable_id, task_id)`` pairs.
    """

    states: tuple[StateDef, ...]
    edges: tuple[EdgeDef, ...]
    priors: tuple[float, ...]
    tasks: tuple[TaskDef, ...]
    task_state_incidence: tuple[tuple[str, str, int], ...]
    neutral_task_probs: tuple[float, ...]
    p_plus: tuple[float, ...]
    observables: tuple[ObservableDef, ...]
    observable_task_incidence: tuple[tuple[str, str], ...]
    likelihood_params: tuple[LogisticParams, ...]
    likelihood_mode: str = "average"
    holding_params: tuple[float, ...] = ()
    substeps_k: int = 1
    score_weights: tuple[float, ...] = ()
    label: str = ""

    # -- id helpers ---------------------------------------------------------

    @property
    def state_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.states)

    @property
    def neutral_id(self) -> str:
        return self.states[0].id

    @property
    def active_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.states[1:])

    @property
    def task_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tasks)

    def state_index(self, state_id: str) -> int:
        try:
            return self.state_ids.index(state_id)
        except ValueError:
            raise KeyError(f"unknown state id {state_id!r}") from None

    def task_index(self, task_id: str) -> int:
        try:
            return self.task_ids.index(task_id)
        except ValueError:
            raise KeyError(f"unknown task id {task_id!r}") from None

    def neutral_prob(self, task_id: str) -> float:
        return self.neutral_task_probs[self.task_index(task_id)]

    def logistic_params(self, task_id: str) -> LogisticParams:
        return self.likelihood_params[self.task_index(task_id)]

    def holding(self, state_id: str) -> float:
        idx = self.state_index(state_id)
        if idx == 0:
            raise KeyError("neutral state has no holding parameter")
        return self.holding_params[idx - 1]

    def state_p_plus(self, state_id: str) -> float:
        idx = self.state_index(state_id)
        if idx == 0:
            raise KeyError("neutral state has no p_plus")
        return self.p_plus[idx - 1]

    def incident_tasks(self, state_id: str) -> tuple[tuple[str, int], ...]:
        """(task_id, polarity) pairs incident on a state, in task order."""
        hits = {t: pol for t, s, pol in self.task_state_incidence if s == state_id}
        return tuple((t, hits[t]) for t in self.task_ids if t in hits)

    def tasks_for_observable(self, observable_id: str) -> tuple[str, ...]:
        hits = {t for o, t in self.observable_task_incidence if o == observable_id}
        return tuple(t for t in self.task_ids if t in hits)

    def observables_for_task(self, task_id: str) -> tuple[str, ...]:
        hits = {o for o, t in self.observable_task_incidence if t == task_id}
        return tuple(o.id for o in self.observables if o.id in hits)

    def explicit_edges_from(self, state_id: str) -> tuple[EdgeDef, ...]:
        return tuple(e for e in self.edges if e.src == state_id)

    def implied_neutral_prob(self, state_id: str) -> float:
        """Remaining transition mass from an active state into neutral."""
        explicit = math.fsum(e.prob for e in self.explicit_edges_from(state_id))
        return 1.0 - explicit


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    code: str
    message: str
    path: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == "error")

    @property
    def warnings(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors


def require_valid(spec: ModelSpec) -> None:
    """Reject a spec carrying error-severity findings.

    Every downstream module calls this at its entry points.
    """
    report = validate_model(spec)
    if not report.ok:
        raise InvalidModelError(report)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOP_LEVEL_KEYS = {
    "format",
    "states",
    "edges",
    "priors",
    "tasks",
    "task_state_incidence",
    "neutral_task_probs",
    "p_plus",
    "observables",
    "observable_task_incidence",
    "likelihood_params",
    "likelihood_mode",
    "holding_params",
    "substeps_k",
    "score_weights",
    "label",
    "notes",
}

_REQUIRED_KEYS = (
    "format",
    "states",
    "edges",
    "priors",
    "tasks",
    "task_state_incidence",
    "neutral_task_probs",
    "p_plus",
    "observables",
    "observable_task_incidence",
    "holding_params",
)


def _fail(message: str, position=None):
    raise ModelFormatError(message, position=position)


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_str(value, where: str) -> str:
    if not isinstance(value, str):
        _fail(f"{where}: expected a string, got {value!r}")
    return value


def _check_unique(ids: Iterable[str], kind: str):
    seen = set()
    for i in ids:
        if i in seen:
            _fail(f"duplicate {kind} id {i!r}")
        seen.add(i)


def _keyed_list(raw, where: str, required: tuple[str, ...], optional: tuple[str, ...] = ()):
    if not isinstance(raw, list):
        _fail(f"{where}: expected a list")
    out = []
    for pos, item in enumerate(raw):
        if not isinstance(item, dict):
            _fail(f"{where}[{pos}]: expected an object")
        unknown = set(item) - set(required) - set(optional)
        if unknown:
            _fail(f"{where}[{pos}]: unknown field(s) {sorted(unknown)}")
        for key in required:
            if key not in item:
                _fail(f"{where}[{pos}]: missing field {key!r}")
        out.append(item)
    return out


def parse_model(document) -> ModelSpec:
    """Parse a model document into a :class:`ModelSpec`.

    ``document`` may be JSON text (str/bytes) or an already-decoded mapping.
    Raises :class:`ModelFormatError` on syntax errors (position-reported),
    unknown fields, missing fields, duplicate ids, or dangling references.
    Numerical invariants are *not* checked here; see :func:`validate_model`.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(
                f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                position=(exc.lineno, exc.colno),
            ) from exc
    elif isinstance(document, Mapping):
        doc = dict(document)
    else:
        _fail(f"expected JSON text or a mapping, got {type(document).__name__}")

    if not isinstance(doc, dict):
        _fail("top level of a model document must be an object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        _fail(f"unknown top-level field(s): {sorted(unknown)}")
    for key in _REQUIRED_KEYS:
        if key not in doc:
            _fail(f"missing required field {key!r}")
    if doc["format"] != FORMAT_VERSION:
        _fail(f"unsupported format {doc['format']!r}; this build reads format {FORMAT_VERSION}")

    states = tuple(
        StateDef(id=_as_str(s["id"], "states.id"), name=_as_str(s.get("name", s["id"]), "states.name"))
        for s in _keyed_list(doc["states"], "states", ("id",), ("name",))
    )
    if not states:
        _fail("states: at least the neutral state is required")
    _check_unique((s.id for s in states), "state")
    state_ids = {s.id for s in states}

    def _state_ref(value, where):
        sid = _as_str(value, where)
        if sid not in state_ids:
            _fail(f"{where}: reference to unknown state {sid!r}")
        return sid

    edges = tuple(
        EdgeDef(
            src=_state_ref(e["src"], "edges.src"),
            dst=_state_ref(e["dst"], "edges.dst"),
            prob=_as_number(e["prob"], "edges.prob"),
        )
        for e in _keyed_list(doc["edges"], "edges", ("src", "dst", "prob"))
    )
    _check_unique((f"{e.src}->{e.dst}" for e in edges), "edge")

    tasks = tuple(
        TaskDef(
            id=_as_str(t["id"], "tasks.id"),
            name=_as_str(t.get("name", t["id"]), "tasks.name"),
            evidence_only=bool(t.get("evidence_only", False)),
        )
        for t in _keyed_list(doc["tasks"], "tasks", ("id",), ("name", "evidence_only"))
    )
    _check_unique((t.id for t in tasks), "task")
    task_ids = {t.id for t in tasks}

    def _task_ref(value, where):
        tid = _as_str(value, where)
        if tid not in task_ids:
            _fail(f"{where}: reference to unknown task {tid!r}")
        return tid

    def _aligned(mapping, keys, where, kind):
        if not isinstance(mapping, dict):
            _fail(f"{where}: expected an object keyed by {kind} id")
        unknown = set(mapping) - set(keys)
        if unknown:
            _fail(f"{where}: reference to unknown {kind}(s) {sorted(unknown)}")
        missing = [k for k in keys if k not in mapping]
        if missing:
            _fail(f"{where}: missing entries for {missing}")
        return tuple(_as_number(mapping[k], f"{where}.{k}") for k in keys)

    priors = _aligned(doc["priors"], [s.id for s in states], "priors", "state")

    incidence = []
    raw_inc = doc["task_state_incidence"]
    if not isinstance(raw_inc, dict):
        _fail("task_state_incidence: expected an object keyed by task id")
    for tid, entry in raw_inc.items():
        tid = _task_ref(tid, "task_state_incidence")
        if isinstance(entry, list):
            # List shorthand: every listed state is a positive indicator.
            pairs = [(sid, "+") for sid in entry]
        elif isinstance(entry, dict):
            pairs = list(entry.items())
        else:
            _fail(f"task_state_incidence.{tid}: expected a list of states or a state->polarity object")
        for sid, polarity in pairs:
            sid = _state_ref(sid, f"task_state_incidence.{tid}")
            if polarity not in ("+", "-"):
                _fail(f"task_state_incidence.{tid}.{sid}: polarity must be '+' or '-'")
            incidence.append((tid, sid, POSITIVE if polarity == "+" else NEGATIVE))
    # Canonical order: task declaration order, then state declaration order.
    task_order = {t.id: i for i, t in enumerate(tasks)}
    state_order = {s.id: i for i, s in enumerate(states)}
    incidence.sort(key=lambda triple: (task_order[triple[0]], state_order[triple[1]]))

    neutral_task_probs = _aligned(doc["neutral_task_probs"], [t.id for t in tasks], "neutral_task_probs", "task")
    p_plus = _aligned(doc["p_plus"], [s.id for s in states[1:]], "p_plus", "state")
    holding = _aligned(doc["holding_params"], [s.id for s in states[1:]], "holding_params", "state")

    observables = tuple(
        ObservableDef(
            id=_as_str(o["id"], "observables.id"),
            name=_as_str(o.get("name", o["id"]), "observables.name"),
            mean=_as_number(o["mean"], "observables.mean"),
            std=_as_number(o["std"], "observables.std"),
        )
        for o in _keyed_list(doc["observables"], "observables", ("id", "mean", "std"), ("name",))
    )
    _check_unique((o.id for o in observables), "observable")
    observable_ids = {o.id for o in observables}

    obs_task = []
    raw_ot = doc["observable_task_incidence"]
    if not isinstance(raw_ot, dict):
        _fail("observable_task_incidence: expected an object keyed by observable id")
    for oid, tids in raw_ot.items():
        if oid not in observable_ids:
            _fail(f"observable_task_incidence: reference to unknown observable {oid!r}")
        if not isinstance(tids, list):
            _fail(f"observable_task_incidence.{oid}: expected a list of task ids")
        for tid in tids:
            obs_task.append((oid, _task_ref(tid, f"observable_task_incidence.{oid}")))
    obs_order = {o.id: i for i, o in enumerate(observables)}
    obs_task.sort(key=lambda pair: (obs_order[pair[0]], task_order[pair[1]]))
    _check_unique((f"{o}:{t}" for o, t in obs_task), "observable-task incidence")

    raw_lp = doc.get("likelihood_params", {})
    if not isinstance(raw_lp, dict):
        _fail("likelihood_params: expected an object keyed by task id")
    unknown = set(raw_lp) - task_ids
    if unknown:
        _fail(f"likelihood_params: reference to unknown task(s) {sorted(unknown)}")
    params = []
    for t in tasks:
        entry = raw_lp.get(t.id)
        if entry is None:
            params.append(LogisticParams())
            continue
        if not isinstance(entry, dict) or set(entry) - {"x0", "k0", "k1"}:
            _fail(f"likelihood_params.{t.id}: expected an object with x0/k0/k1")
        params.append(
            LogisticParams(
                x0=_as_number(entry.get("x0", DEFAULT_X0), f"likelihood_params.{t.id}.x0"),
                k0=_as_number(entry.get("k0", DEFAULT_K0), f"likelihood_params.{t.id}.k0"),
                k1=_as_number(entry.get("k1", DEFAULT_K1), f"likelihood_params.{t.id}.k1"),
            )
        )

    mode = doc.get("likelihood_mode", "average")
    if mode not in LIKELIHOOD_MODES:
        _fail(f"likelihood_mode: expected one of {LIKELIHOOD_MODES}, got {mode!r}")

    substeps = doc.get("substeps_k", 1)
    if isinstance(substeps, bool) or not isinstance(substeps, int):
        _fail(f"substeps_k: expected an integer, got {substeps!r}")

    if "score_weights" in doc:
        weights = _aligned(doc["score_weights"], [s.id for s in states], "score_weights", "state")
    else:
        weights = tuple(float(i) for i in range(len(states)))

    return ModelSpec(
        states=states,
        edges=edges,
        priors=priors,
        tasks=tasks,
        task_state_incidence=tuple(incidence),
        neutral_task_probs=neutral_task_probs,
        p_plus=p_plus,
        observables=observables,
        observable_task_incidence=tuple(obs_task),
        likelihood_params=tuple(params),
        likelihood_mode=mode,
        holding_params=holding,
        substeps_k=substeps,
        score_weights=weights,
        label=str(doc.get("label", "")),
    )


def serialize_model(spec: ModelSpec) -> dict:
    """Inverse of :func:`parse_model` up to field ordering and defaults."""
    return {
        "format": FORMAT_VERSION,
        "label": spec.label,
        "states": [{"id": s.id, "name": s.name} for s in spec.states],
        "edges": [{"src": e.src, "dst": e.dst, "prob": e.prob} for e in spec.edges],
        "priors": {s.id: p for s, p in zip(spec.states, spec.priors)},
        "tasks": [
            {"id": t.id, "name": t.name, **({"evidence_only": True} if t.evidence_only else {})}
            for t in spec.tasks
        ],
        "task_state_incidence": {
            t.id: {
                s: ("+" if pol == POSITIVE else "-")
                for tid, s, pol in spec.task_state_incidence
                if tid == t.id
            }
            for t in spec.tasks
            if any(tid == t.id for tid, _, _ in spec.task_state_incidence)
        },
        "neutral_task_probs": {t.id: p for t, p in zip(spec.tasks, spec.neutral_task_probs)},
        "p_plus": {s.id: p for s, p in zip(spec.states[1:], spec.p_plus)},
        "observables": [
            {"id": o.id, "name": o.name, "mean": o.mean, "std": o.std} for o in spec.observables
        ],
        "observable_task_incidence": {
            o.id: [t for oid, t in spec.observable_task_incidence if oid == o.id]
            for o in spec.observables
            if any(oid == o.id for oid, _ in spec.observable_task_incidence)
        },
        "likelihood_params": {
            t.id: {"x0": p.x0, "k0": p.k0, "k1": p.k1}
            for t, p in zip(spec.tasks, spec.likelihood_params)
        },
        "likelihood_mode": spec.likelihood_mode,
        "holding_params": {s.id: z for s, z in zip(spec.states[1:], spec.holding_params)},
        "substeps_k": spec.substeps_k,
        "score_weights": {s.id: w for s, w in zip(spec.states, spec.score_weights)},
    }


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

PRIOR_TOL = 1e-9
EDGE_TOL = 1e-9


@lru_cache(maxsize=256)
def validate_model(spec: ModelSpec) -> ValidationReport:
    """Check every ModelSpec invariant; violations become findings, not
    exceptions. An empty report means the model is usable everywhere."""
    findings: list[Finding] = []

    def err(code, message, path):
        findings.append(Finding("error", code, message, path))

    def warn(code, message, path):
        findings.append(Finding("warning", code, message, path))

    n = len(spec.states)
    if len(spec.priors) != n or len(spec.score_weights) != n:
        err("SHAPE", "priors/score_weights not aligned with states", "priors")
        return ValidationReport(tuple(findings))
    if len(spec.p_plus) != n - 1 or len(spec.holding_params) != n - 1:
        err("SHAPE", "p_plus/holding_params not aligned with active states", "p_plus")
        return ValidationReport(tuple(findings))
    if len(spec.neutral_task_probs) != len(spec.tasks) or len(spec.likelihood_params) != len(spec.tasks):
        err("SHAPE", "per-task parameter tuples not aligned with tasks", "tasks")
        return ValidationReport(tuple(findings))

    total = math.fsum(spec.priors)
    if abs(total - 1.0) > PRIOR_TOL:
        err("PRIOR_SUM", f"priors sum to {total!r}, expected 1", "priors")
    for s, p in zip(spec.states, spec.priors):
        if p < 0:
            err("PRIOR_RANGE", f"prior for {s.id} is negative ({p})", f"priors.{s.id}")

    neutral = spec.neutral_id
    state_ids = set(spec.state_ids)
    task_ids = set(spec.task_ids)
    for e in spec.edges:
        if e.src not in state_ids or e.dst not in state_ids:
            err("BAD_REF", f"edge {e.src}->{e.dst} references an unknown state", "edges")
            continue
        if e.src == neutral:
            err("NEUTRAL_EDGE", "neutral state has no outgoing edges", f"edges.{e.src}->{e.dst}")
        if e.src == e.dst:
            err("EDGE_SELF", f"self-edge on {e.src}; holding is modelled separately", f"edges.{e.src}->{e.dst}")
        if not (0.0 <= e.prob <= 1.0):
            err("EDGE_RANGE", f"edge probability {e.prob} outside [0,1]", f"edges.{e.src}->{e.dst}")
    for sid in spec.active_ids:
        explicit = math.fsum(e.prob for e in spec.explicit_edges_from(sid))
        if explicit > 1.0 + EDGE_TOL:
            err("EDGE_SUM", f"edges out of {sid} sum to {explicit!r} > 1", f"edges.{sid}")

    for tid, sid, _pol in spec.task_state_incidence:
        if tid not in task_ids or sid not in state_ids:
            err("BAD_REF", f"incidence ({tid}, {sid}) references an unknown id", "task_state_incidence")
            continue
        if sid == neutral:
            err("NEUTRAL_TASK", f"task {tid} is incident on the neutral state", f"task_state_incidence.{tid}")
    for sid in spec.active_ids:
        if not spec.incident_tasks(sid):
            err("STATE_NO_TASK", f"active state {sid} has no incident task", f"task_state_incidence.{sid}")

    for t, p in zip(spec.tasks, spec.neutral_task_probs):
        if not (0.0 < p < 1.0):
            err("NEUTRAL_PROB_RANGE", f"neutral probability for {t.id} is {p}, need (0,1)", f"neutral_task_probs.{t.id}")
    for s, p in zip(spec.states[1:], spec.p_plus):
        if not (0.0 < p < 1.0):
            err("P_PLUS_RANGE", f"p_plus for {s.id} is {p}, need (0,1)", f"p_plus.{s.id}")
        elif p < P_PLUS_FLOOR:
            warn("P_PLUS_FLOOR", f"p_plus for {s.id} is {p} < {P_PLUS_FLOOR}; weakly discriminating", f"p_plus.{s.id}")
    for s, z in zip(spec.states[1:], spec.holding_params):
        if not (0.0 < z < 1.0):
            err("ZETA_RANGE", f"holding parameter for {s.id} is {z}, need (0,1)", f"holding_params.{s.id}")

    for o in spec.observables:
        if not o.std > 0:
            err("SIGMA_RANGE", f"std for observable {o.id} is {o.std}, need > 0", f"observables.{o.id}")
    for oid, tid in spec.observable_task_incidence:
        if oid not in {o.id for o in spec.observables} or tid not in task_ids:
            err("BAD_REF", f"observable incidence ({oid}, {tid}) references an unknown id", "observable_task_incidence")
    for t in spec.tasks:
        if not t.evidence_only and not spec.observables_for_task(t.id):
            err("TASK_NO_OBSERVABLE", f"task {t.id} has no observable and is not evidence-only", f"tasks.{t.id}")

    for t, lp in zip(spec.tasks, spec.likelihood_params):
        if not (lp.k0 > 0 and lp.k1 > 0):
            err("GROWTH_RANGE", f"growth rates for {t.id} must be > 0", f"likelihood_params.{t.id}")

    if spec.likelihood_mode not in LIKELIHOOD_MODES:
        err("MODE", f"likelihood_mode {spec.likelihood_mode!r} not in {LIKELIHOOD_MODES}", "likelihood_mode")
    if spec.substeps_k < 1:
        err("SUBSTEPS_RANGE", f"substeps_k is {spec.substeps_k}, need >= 1", "substeps_k")

    return ValidationReport(tuple(findings))


# ---------------------------------------------------------------------------
# Structure transforms
# ---------------------------------------------------------------------------


def _weighted_average(values: Sequence[float], weights: Sequence[float]) -> float:
    # Equal values short-circuit: keeps refine->coarsen round trips exact.
    if all(v == values[0] for v in values):
        return values[0]
    wsum = math.fsum(weights)
    if wsum == 0.0:
        return math.fsum(values) / len(values)
    return math.fsum(v * w for v, w in zip(values, weights)) / wsum


def coarsen(spec: ModelSpec, merge_map: Mapping[str, str]) -> ModelSpec:
    """Collapse groups of active states into merged states.

    ``merge_map`` maps every active state id to its merged id (the map must
    be total over active states; the neutral state may be omitted or mapped
    to itself). Merged priors are sums; merged task sets are unions; merged
    edge and holding parameters are prior-weighted averages of the members',
    with intra-group edges dropped into the implied-neutral remainder.
    """
    merge = dict(merge_map)
    neutral = spec.neutral_id
    if merge.get(neutral, neutral) != neutral:
        raise ValueError("neutral state cannot be merged with an active state")
    merge[neutral] = neutral
    missing = [sid for sid in spec.active_ids if sid not in merge]
    if missing:
        raise ValueError(f"merge_map must cover every active state; missing {missing}")
    for sid in spec.active_ids:
        if merge[sid] == neutral:
            raise ValueError(f"active state {sid} cannot merge into the neutral state")

    # Merged-state order: first appearance in declaration order.
    new_ids: list[str] = []
    members: dict[str, list[str]] = {}
    for sid in spec.state_ids:
        nid = merge[sid]
        if nid not in members:
            members[nid] = []
            new_ids.append(nid)
        members[nid].append(sid)

    def member_name(nid):
        names = [spec.states[spec.state_index(m)].name for m in members[nid]]
        return names[0] if len(names) == 1 else "+".join(names)

    new_states = tuple(StateDef(id=nid, name=member_name(nid)) for nid in new_ids)
    prior_of = dict(zip(spec.state_ids, spec.priors))
    new_priors = tuple(math.fsum(prior_of[m] for m in members[nid]) for nid in new_ids)

    new_edges: list[EdgeDef] = []
    for src_nid in new_ids[1:]:
        group = members[src_nid]
        weights = [prior_of[m] for m in group]
        for dst_nid in new_ids[1:]:
            if dst_nid == src_nid:
                continue
            sums = [
                math.fsum(e.prob for e in spec.explicit_edges_from(m) if merge[e.dst] == dst_nid)
                for m in group
            ]
            prob = _weighted_average(sums, weights)
            if prob > 0.0:
                new_edges.append(EdgeDef(src=src_nid, dst=dst_nid, prob=prob))
        explicit_neutral = [
            math.fsum(e.prob for e in spec.explicit_edges_from(m) if e.dst == neutral)
            for m in group
        ]
        neutral_prob = _weighted_average(explicit_neutral, weights)
        if neutral_prob > 0.0:
            new_edges.append(EdgeDef(src=src_nid, dst=neutral, prob=neutral_prob))

    incidence: list[tuple[str, str, int]] = []
    for nid in new_ids[1:]:
        merged: dict[str, int] = {}
        for m in members[nid]:
            for tid, pol in spec.incident_tasks(m):
                # Positive wins on polarity conflicts between merged members.
                merged[tid] = max(merged.get(tid, pol), pol)
        for tid in spec.task_ids:
            if tid in merged:
                incidence.append((tid, nid, merged[tid]))
    state_order = {nid: i for i, nid in enumerate(new_ids)}
    task_order = {t.id: i for i, t in enumerate(spec.tasks)}
    incidence.sort(key=lambda triple: (task_order[triple[0]], state_order[triple[1]]))

    p_plus_of = dict(zip(spec.active_ids, spec.p_plus))
    holding_of = dict(zip(spec.active_ids, spec.holding_params))
    weight_of = dict(zip(spec.state_ids, spec.score_weights))
    new_p_plus = tuple(
        _weighted_average([p_plus_of[m] for m in members[nid]], [prior_of[m] for m in members[nid]])
        for nid in new_ids[1:]
    )
    new_holding = tuple(
        _weighted_average([holding_of[m] for m in members[nid]], [prior_of[m] for m in members[nid]])
        for nid in new_ids[1:]
    )
    new_weights = tuple(
        _weighted_average([weight_of[m] for m in members[nid]], [prior_of[m] for m in members[nid]])
        for nid in new_ids
    )

    return replace(
        spec,
        states=new_states,
        edges=tuple(new_edges),
        priors=new_priors,
        task_state_incidence=tuple(incidence),
        p_plus=new_p_plus,
        holding_params=new_holding,
        score_weights=new_weights,
    )


@dataclass(frozen=True)
class ChildState:
    """Declaration of one child when splitting a state."""

    id: str
    prior_fraction: float
    tasks: tuple[str, ...]
    name: str = ""
    p_plus: float | None = None
    holding: float | None = None
    score_weight: float | None = None


def refine(
    spec: ModelSpec,
    split_id: str,
    children: Sequence[ChildState],
    edge_overrides: Sequence[EdgeDef] = (),
) -> ModelSpec:
    """Split one active state into several children.

    Children inherit the parent's prior scaled by their fractions and the
    parent's elicitation parameters unless overridden. Every task incident on
    the parent must be assigned to at least one child. Edges touching the
    parent are redistributed: incoming edges split across children by prior
    fraction, outgoing edges copied to each child, except where
    ``edge_overrides`` provides explicit replacements (an override with
    ``src == child`` replaces that child's whole outgoing row; an override
    with ``dst`` among the children replaces that source's edges into the
    split).
    """
    if split_id == spec.neutral_id:
        raise ValueError("cannot split the neutral state")
    split_idx = spec.state_index(split_id)
    if not children:
        raise ValueError("at least one child is required")
    child_id_set = {c.id for c in children}
    if len(child_id_set) != len(children):
        raise ValueError("duplicate child ids")
    clash = child_id_set & (set(spec.state_ids) - {split_id})
    if clash:
        raise ValueError(f"child ids collide with existing states: {sorted(clash)}")

    frac_total = math.fsum(c.prior_fraction for c in children)
    if abs(frac_total - 1.0) > 1e-9:
        raise ValueError(f"prior fractions sum to {frac_total!r}, expected 1")

    parent_tasks = {tid: pol for tid, pol in spec.incident_tasks(split_id)}
    assigned = set()
    for c in children:
        unknown = set(c.tasks) - set(parent_tasks)
        if unknown:
            raise ValueError(f"child {c.id} claims tasks not on the split state: {sorted(unknown)}")
        if not c.tasks:
            raise ValueError(f"child {c.id} has no tasks")
        assigned.update(c.tasks)
    orphaned = set(parent_tasks) - assigned
    if orphaned:
        raise ValueError(f"tasks of the split state not assigned to any child: {sorted(orphaned)}")

    child_ids = [c.id for c in children]
    new_states: list[StateDef] = []
    for i, s in enumerate(spec.states):
        if i == split_idx:
            for c in children:
                new_states.append(StateDef(id=c.id, name=c.name or c.id))
        else:
            new_states.append(s)

    parent_prior = spec.priors[split_idx]
    prior_of = dict(zip(spec.state_ids, spec.priors))
    new_priors = []
    for s in new_states:
        if s.id in child_ids:
            c = children[child_ids.index(s.id)]
            new_priors.append(parent_prior * c.prior_fraction)
        else:
            new_priors.append(prior_of[s.id])

    for e in edge_overrides:
        if e.src not in child_ids and e.dst not in child_ids:
            raise ValueError(f"edge override {e.src}->{e.dst} does not touch a child state")
    overridden_srcs = {e.src for e in edge_overrides}

    new_edges: list[EdgeDef] = [
        e for e in spec.edges if e.src != split_id and e.dst != split_id
    ]
    new_edges.extend(edge_overrides)
    # Incoming edges without an override from that source: prior-fraction split.
    for e in spec.edges:
        if e.dst != split_id or e.src == split_id or e.src in overridden_srcs:
            continue
        for c in children:
            new_edges.append(EdgeDef(src=e.src, dst=c.id, prob=e.prob * c.prior_fraction))
    # Outgoing edges: children inherit the parent's row unless overridden.
    parent_out = [e for e in spec.explicit_edges_from(split_id) if e.dst != split_id]
    for c in children:
        if c.id in overridden_srcs:
            continue
        for e in parent_out:
            new_edges.append(EdgeDef(src=c.id, dst=e.dst, prob=e.prob))

    incidence: list[tuple[str, str, int]] = []
    for tid, sid, pol in spec.task_state_incidence:
        if sid != split_id:
            incidence.append((tid, sid, pol))
    for c in children:
        for tid in c.tasks:
            incidence.append((tid, c.id, parent_tasks[tid]))
    state_order = {s.id: i for i, s in enumerate(new_states)}
    task_order = {t.id: i for i, t in enumerate(spec.tasks)}
    incidence.sort(key=lambda triple: (task_order[triple[0]], state_order[triple[1]]))

    p_plus_of = dict(zip(spec.active_ids, spec.p_plus))
    holding_of = dict(zip(spec.active_ids, spec.holding_params))
    weight_of = dict(zip(spec.state_ids, spec.score_weights))
    parent_p_plus = p_plus_of[split_id]
    parent_holding = holding_of[split_id]
    parent_weight = weight_of[split_id]

    new_p_plus = []
    new_holding = []
    new_weights = []
    for s in new_states:
        if s.id in child_ids:
            c = children[child_ids.index(s.id)]
            new_p_plus.append(c.p_plus if c.p_plus is not None else parent_p_plus)
            new_holding.append(c.holding if c.holding is not None else parent_holding)
            new_weights.append(c.score_weight if c.score_weight is not None else parent_weight)
        else:
            new_weights.append(weight_of[s.id])
            if s.id != spec.neutral_id:
                new_p_plus.append(p_plus_of[s.id])
                new_holding.append(holding_of[s.id])

    result = replace(
        spec,
        states=tuple(new_states),
        edges=tuple(new_edges),
        priors=tuple(new_priors),
        task_state_incidence=tuple(incidence),
        p_plus=tuple(new_p_plus),
        holding_params=tuple(new_holding),
        score_weights=tuple(new_weights),
    )
    report = validate_model(result)
    if not report.ok:
        raise InvalidModelError(report)
    return result
