"""Filtering engine: predict with transition-matrix powers, correct with
task-marginalised intensity likelihoods, and condition on direct task
evidence, with the equivalent log-odds view.

Per period the position distribution advances by the k-th matrix power, then
one Bayes correction runs over the joint task lattice. Every state's
marginal likelihood is computed over the same support set (the union of the
active states' relevant tasks), with each state's conditional table extended
to unmentioned tasks by the neutral naive-Bayes marginals (a simple task
vector carries no cross-state information, so this extension is the minimal
consistent joint). The neutral state's conditional is the naive-Bayes joint
itself. Clamped tasks contribute their configuration probability exactly and
their intensity components are ignored: perfect task information overrides
routine signals, so a fully clamped update is bitwise invariant to the
intensities.

Likelihood sums run in log space with max-subtraction before
exponentiation. A state with zero current mass stays at zero through any
update: clamped evidence cannot revive a structurally unreachable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ContradictoryEvidenceError, FlatEvidenceError
from .intensity import IntensityVector, ObservationRecord, g_pair, intensities
from .model import ModelSpec, require_valid
from .tasks import conditional_table, union_tasks
from .transition import cached_matrix_power

NEG_INF = float("-inf")


@dataclass(frozen=True)
class EvidenceEvent:
    """Directly observed task values: task id -> 0/1, with provenance."""

    t: float
    tasks: Mapping[str, int] = field(default_factory=dict)
    note: str = ""


@dataclass(frozen=True)
class Annotation:
    t: float
    text: str


@dataclass(frozen=True)
class TimelinePoint:
    """One period of the posterior timeline.

    ``rho_prior``/``rho_post`` are per-active-state log-odds against neutral
    of the predicted and posterior distributions; ``log_lik_ratio`` is the
    per-active-state log marginal-likelihood ratio applied this period (zero
    when the period carried no information).
    """

    t: float
    predicted: tuple[float, ...]
    posterior: tuple[float, ...]
    score: float
    rho_prior: tuple[float, ...]
    rho_post: tuple[float, ...]
    log_lik_ratio: tuple[float, ...]
    flat_evidence: bool = False


@dataclass(frozen=True)
class CaseState:
    """A case: current distribution plus its append-only filtration.

    Values are immutable; :func:`step` returns a new case. Replaying the
    events of a case through ``step`` reproduces it bit for bit.
    """

    spec: ModelSpec
    dist: tuple[float, ...]
    events: tuple = ()
    timeline: tuple[TimelinePoint, ...] = ()

    @property
    def last_t(self) -> float | None:
        return self.events[-1].t if self.events else None


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else NEG_INF


def _logsumexp(values: list[float]) -> float:
    m = max(values)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


def _log_odds(dist: Sequence[float]) -> tuple[float, ...]:
    """Per-active-state log odds against the neutral state; infinite
    sentinels where a probability is exactly zero."""
    p0 = dist[0]
    out = []
    for p in dist[1:]:
        if p > 0.0 and p0 > 0.0:
            out.append(math.log(p) - math.log(p0))
        elif p0 == 0.0:
            out.append(float("inf") if p > 0.0 else float("nan"))
        else:
            out.append(NEG_INF)
    return tuple(out)


def position_score(dist: Sequence[float], spec: ModelSpec) -> float:
    """Expected escalation rank: score-weight dot distribution."""
    return float(math.fsum(w * p for w, p in zip(spec.score_weights, dist)))


# ---------------------------------------------------------------------------
# Marginal likelihoods
# ---------------------------------------------------------------------------


def _check_evidence(spec: ModelSpec, clamps: Mapping[str, int]) -> dict[str, int]:
    out = {}
    for task_id, value in clamps.items():
        spec.task_index(task_id)  # raises KeyError on unknown ids
        if value not in (0, 1):
            raise ValueError(f"evidence for {task_id!r} must be 0 or 1, got {value!r}")
        out[task_id] = int(value)
    return out


def _state_models(spec: ModelSpec):
    """(task_ids, table probs) per state row; the neutral row has the empty
    table, its tasks all covered by the naive-Bayes extension."""
    models = [((), {(): 1.0})]
    for sid in spec.active_ids:
        table = conditional_table(spec, sid)
        models.append((table.task_ids, table.probs))
    return models


def state_logliks(
    spec: ModelSpec,
    z: Mapping[str, float | None],
    clamps: Mapping[str, int],
) -> np.ndarray:
    """log marginal likelihood per state of this period's information.

    ``z`` maps task id to intensity (None or absent: undefined, flat);
    ``clamps`` maps task id to directly observed 0/1 values. Clamped tasks
    drop out of the intensity term entirely.
    """
    support = union_tasks(spec)
    neutral_of = {t: spec.neutral_prob(t) for t in spec.task_ids}
    pairs = {t: g_pair(z.get(t), spec.logistic_params(t)) for t in support}
    unclamped = [t for t in support if t not in clamps]
    mode = spec.likelihood_mode

    out = []
    for task_ids, probs in _state_models(spec):
        own = set(task_ids)
        clamp_idx = {i: clamps[t] for i, t in enumerate(task_ids) if t in clamps}
        free_idx = [i for i in range(len(task_ids)) if i not in clamp_idx]
        # log NB factor of clamps outside this state's own table
        log_f_out = math.fsum(
            _log(neutral_of[t] if v else 1.0 - neutral_of[t])
            for t, v in clamps.items()
            if t not in own
        )

        if mode == "product":
            terms = []
            for cfg, p in probs.items():
                if any(cfg[i] != v for i, v in clamp_idx.items()):
                    continue
                ll = _log(p)
                for i in free_idx:
                    g1, g0 = pairs[task_ids[i]]
                    ll += _log(g1 if cfg[i] else g0)
                terms.append(ll)
            ll = _logsumexp(terms) + log_f_out
            for t in unclamped:
                if t in own:
                    continue
                g1, g0 = pairs[t]
                p = neutral_of[t]
                ll += _log(p * g1 + (1.0 - p) * g0)
            out.append(ll)
            continue

        # average mode: linearity gives the likelihood from clamp-consistent
        # per-task enactment masses
        p_in = 0.0
        a_in = {i: 0.0 for i in free_idx}
        for cfg, p in probs.items():
            if any(cfg[i] != v for i, v in clamp_idx.items()):
                continue
            p_in += p
            for i in free_idx:
                if cfg[i]:
                    a_in[i] += p
        f_out = math.exp(log_f_out) if log_f_out != NEG_INF else 0.0
        p_tot = p_in * f_out
        if not unclamped:
            out.append(_log(p_tot))
            continue
        total = 0.0
        for t in unclamped:
            g1, g0 = pairs[t]
            if t in own:
                a = a_in[task_ids.index(t)] * f_out
            else:
                a = p_tot * neutral_of[t]
            total += a * g1 + (p_tot - a) * g0
        out.append(_log(total / len(unclamped)))
    return np.array(out)


def _uninformative(spec: ModelSpec, z: Mapping[str, float | None], clamps: Mapping[str, int]) -> bool:
    """A period with no clamps and no defined intensity over the support set
    carries no information; the correction is skipped so the posterior is
    exactly the prediction."""
    if clamps:
        return False
    return all(z.get(t) is None for t in union_tasks(spec))


def _combine(dist, logliks: np.ndarray, exhausted: type[Exception]) -> np.ndarray:
    d = np.asarray(dist, dtype=float)
    with np.errstate(divide="ignore"):
        log_post = np.where(d > 0.0, np.log(np.where(d > 0.0, d, 1.0)) + logliks, NEG_INF)
    m = log_post.max()
    if m == NEG_INF:
        raise exhausted()
    post = np.exp(log_post - m)
    total = post.sum()
    if total == 0.0 or not np.isfinite(total):
        raise exhausted()
    return post / total


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def predict(dist, spec: ModelSpec, k: int | None = None) -> np.ndarray:
    """Advance a distribution by the k-th power of the single-period matrix
    (k defaults to the model's substep count)."""
    k = spec.substeps_k if k is None else k
    tm = cached_matrix_power(spec, k)
    return np.asarray(dist, dtype=float) @ tm.matrix


def update(dist, z: IntensityVector | Mapping[str, float | None], spec: ModelSpec) -> np.ndarray:
    """Bayes correction with routine intensities only."""
    zmap = z.z if isinstance(z, IntensityVector) else z
    if _uninformative(spec, zmap, {}):
        return np.asarray(dist, dtype=float).copy()
    logliks = state_logliks(spec, zmap, {})
    return _combine(dist, logliks, FlatEvidenceError)


def condition_on_tasks(
    dist,
    evidence: EvidenceEvent,
    z: IntensityVector | Mapping[str, float | None] | None,
    spec: ModelSpec,
) -> np.ndarray:
    """Bayes correction with clamped task values, plus intensities for the
    unclamped tasks when provided."""
    clamps = _check_evidence(spec, evidence.tasks)
    zmap = (z.z if isinstance(z, IntensityVector) else z) or {}
    if not clamps:
        return update(dist, zmap, spec)
    logliks = state_logliks(spec, zmap, clamps)
    return _combine(dist, logliks, ContradictoryEvidenceError)


def new_case(spec: ModelSpec) -> CaseState:
    """Open a case at the model's priors (period-0 timeline point)."""
    require_valid(spec)
    dist = tuple(float(p) for p in spec.priors)
    rho = _log_odds(dist)
    point = TimelinePoint(
        t=0.0,
        predicted=dist,
        posterior=dist,
        score=position_score(dist, spec),
        rho_prior=rho,
        rho_post=rho,
        log_lik_ratio=tuple(0.0 for _ in spec.active_ids),
    )
    return CaseState(spec=spec, dist=dist, events=(), timeline=(point,))


def step(
    case: CaseState,
    record: ObservationRecord | None = None,
    evidence: EvidenceEvent | None = None,
) -> CaseState:
    """Advance a case one period: predict, then correct with whatever this
    period carries (observations, evidence, both, or nothing).

    The new timestamp must exceed the case's last event timestamp. On a flat
    update (all likelihoods underflowed) the posterior stays at the
    prediction and an annotation is journaled.
    """
    if record is None and evidence is None:
        raise ValueError("a step needs an observation record or an evidence event")
    if record is not None and evidence is not None and record.t != evidence.t:
        raise ValueError(f"record t={record.t} and evidence t={evidence.t} differ")
    t = record.t if record is not None else evidence.t
    last = case.last_t
    if last is not None and not t > last:
        raise ValueError(f"out-of-order timestamp {t} (last event at {last})")

    spec = case.spec
    predicted = predict(case.dist, spec)
    z = intensities(record, spec) if record is not None else None

    new_events: list = []
    if record is not None:
        new_events.append(record)
    if evidence is not None:
        new_events.append(evidence)

    flat = False
    clamps = _check_evidence(spec, evidence.tasks) if evidence is not None else {}
    zmap = z.z if z is not None else {}
    if _uninformative(spec, zmap, clamps):
        posterior = np.asarray(predicted, dtype=float)
        logliks = np.zeros(len(spec.states))
    elif clamps:
        logliks = state_logliks(spec, zmap, clamps)
        posterior = _combine(predicted, logliks, ContradictoryEvidenceError)
    else:
        logliks = state_logliks(spec, zmap, {})
        try:
            posterior = _combine(predicted, logliks, FlatEvidenceError)
        except FlatEvidenceError:
            posterior = np.asarray(predicted, dtype=float)
            logliks = np.zeros(len(spec.states))
            flat = True
            new_events.append(Annotation(t=t, text="flat evidence: posterior kept at prediction"))

    lam = tuple(float(logliks[i] - logliks[0]) for i in range(1, len(spec.states)))
    point = TimelinePoint(
        t=t,
        predicted=tuple(float(p) for p in predicted),
        posterior=tuple(float(p) for p in posterior),
        score=position_score(posterior, spec),
        rho_prior=_log_odds(predicted),
        rho_post=_log_odds(posterior),
        log_lik_ratio=lam,
        flat_evidence=flat,
    )
    return replace(
        case,
        dist=point.posterior,
        events=case.events + tuple(new_events),
        timeline=case.timeline + (point,),
    )


def replay(spec: ModelSpec, events: Iterable) -> CaseState:
    """Rebuild a case from its filtration, pairing same-period records and
    evidence into single steps."""
    case = new_case(spec)
    pending_record: ObservationRecord | None = None
    pending_evidence: EvidenceEvent | None = None

    def flush(case):
        nonlocal pending_record, pending_evidence
        if pending_record is not None or pending_evidence is not None:
            case = step(case, pending_record, pending_evidence)
            pending_record = None
            pending_evidence = None
        return case

    for event in events:
        if isinstance(event, Annotation):
            continue
        t = event.t
        pending_t = (
            pending_record.t
            if pending_record is not None
            else pending_evidence.t
            if pending_evidence is not None
            else None
        )
        if pending_t is not None and t != pending_t:
            case = flush(case)
        if isinstance(event, ObservationRecord):
            if pending_record is not None:
                case = flush(case)
            pending_record = event
        elif isinstance(event, EvidenceEvent):
            if pending_evidence is not None:
                case = flush(case)
            pending_evidence = event
        else:
            raise TypeError(f"unknown event type {type(event).__name__}")
    return flush(case)


def whatif(
    case: CaseState,
    steps: Iterable[tuple[ObservationRecord | None, EvidenceEvent | None]],
) -> tuple[TimelinePoint, ...]:
    """Hypothetical continuation on a scratch copy; the case is untouched.

    Returns the timeline from the case's current point through the
    hypothetical periods. An empty hypothetical returns just the current
    point.
    """
    scratch = case
    for record, evidence in steps:
        scratch = step(scratch, record, evidence)
    return scratch.timeline[len(case.timeline) - 1 :]


def log_odds_timeline(case: CaseState) -> list[dict]:
    """Per-period prior log-odds, applied log-likelihood ratios, and
    posterior log-odds for every active state."""
    if not case.timeline:
        raise ValueError("case has no timeline")
    rows = []
    for point in case.timeline:
        rows.append(
            {
                "t": point.t,
                "rho_prior": point.rho_prior,
                "log_lik_ratio": point.log_lik_ratio,
                "rho_post": point.rho_post,
            }
        )
    return rows


def timeline_header(spec: ModelSpec) -> list[str]:
    return (
        ["t"]
        + [f"p_{sid}" for sid in spec.state_ids]
        + ["score"]
        + [f"rho_{sid}" for sid in spec.active_ids]
    )


def timeline_rows(timeline: Iterable[TimelinePoint], spec: ModelSpec) -> list[list]:
    """Plot-ready rows: period, posterior per state, score, posterior
    log-odds per active state."""
    rows = []
    for point in timeline:
        rows.append(
            [point.t, *point.posterior, point.score, *point.rho_post]
        )
    return rows
