"""Task layer: index sets, the K statistic, naive-Bayes neutral joints, and
the log-odds interpolated conditional tables of task configurations per
position.

For a position with positive-indicator tasks ``I+`` and negative-indicator
tasks ``I-``, the elicited inputs are a single probability ``p_plus`` (all
positive tasks enacted, no negative task enacted) and the per-task neutral
probabilities. Every other configuration probability is interpolated on the
log-odds scale between ``phi_plus = logit(p_plus)`` and ``phi_0``, the
log-odds of the naive-Bayes neutral probability of that same reference
configuration, with interpolation weight ``alpha_K = (K / r) ** xi`` where
``K`` counts positive tasks enacted plus negative tasks not enacted. The
exponent ``xi`` is solved by bisection so the table sums to one.

With a single incident task the interpolation family has no interior points
to adjust, so the table is the direct complement pair
``{1: p_plus, 0: 1 - p_plus}`` and no exponent is solved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Mapping

from .errors import NoRootError
from .model import NEGATIVE, POSITIVE, ModelSpec

XI_BRACKET = (1e-6, 1e3)
XI_MAX_ITER = 200
MASS_TOL = 1e-10


@dataclass(frozen=True)
class TaskIndexSets:
    """Positive and negative indicator tasks of one active state, in task
    declaration order."""

    state: str
    positive: tuple[str, ...]
    negative: tuple[str, ...]

    @property
    def r_pos(self) -> int:
        return len(self.positive)

    @property
    def r_neg(self) -> int:
        return len(self.negative)


@dataclass(frozen=True)
class TaskConditionalTable:
    """p(task configuration | position) for every configuration over the
    state's relevant tasks.

    ``task_ids`` fixes the bit order of configuration tuples (declaration
    order). ``xi`` is None for single-task states (complement rule).
    """

    state: str
    task_ids: tuple[str, ...]
    polarity: tuple[int, ...]
    probs: Mapping[tuple[int, ...], float]
    p_plus: float
    p0_ref: float
    xi: float | None

    @property
    def r(self) -> int:
        return len(self.task_ids)

    def prob(self, config: Mapping[str, int] | tuple[int, ...]) -> float:
        return self.probs[self._as_key(config)]

    def _as_key(self, config) -> tuple[int, ...]:
        if isinstance(config, tuple):
            if len(config) != self.r:
                raise ValueError(f"configuration length {len(config)} != {self.r}")
            return tuple(int(bool(c)) for c in config)
        missing = [t for t in self.task_ids if t not in config]
        if missing:
            raise KeyError(f"configuration missing tasks {missing}")
        return tuple(int(bool(config[t])) for t in self.task_ids)

    def marginal(self, task_id: str) -> float:
        """p(task enacted | position)."""
        i = self.task_ids.index(task_id)
        return math.fsum(p for cfg, p in self.probs.items() if cfg[i] == 1)


def index_sets(spec: ModelSpec, state_id: str) -> TaskIndexSets:
    """Positive/negative indicator task ids for one active state."""
    if state_id == spec.neutral_id:
        raise KeyError("neutral state has no task index sets")
    pairs = spec.incident_tasks(state_id)
    if not pairs:
        raise KeyError(f"state {state_id!r} has no incident tasks")
    return TaskIndexSets(
        state=state_id,
        positive=tuple(t for t, pol in pairs if pol == POSITIVE),
        negative=tuple(t for t, pol in pairs if pol == NEGATIVE),
    )


def relevant_tasks(spec: ModelSpec, state_id: str) -> tuple[str, ...]:
    """All tasks relevant to a state, in declaration order."""
    return tuple(t for t, _pol in spec.incident_tasks(state_id))


@lru_cache(maxsize=256)
def union_tasks(spec: ModelSpec) -> tuple[str, ...]:
    """Tasks relevant to at least one active state, in declaration order."""
    used = {t for t, _s, _pol in spec.task_state_incidence}
    return tuple(t for t in spec.task_ids if t in used)


def k_statistic(enacted_pos: Iterable[str], enacted_neg: Iterable[str], sets: TaskIndexSets) -> int:
    """Number of positive tasks being done plus negative tasks not being done."""
    a = set(enacted_pos)
    b = set(enacted_neg)
    if not a <= set(sets.positive):
        raise ValueError(f"{sorted(a - set(sets.positive))} not in the positive set of {sets.state}")
    if not b <= set(sets.negative):
        raise ValueError(f"{sorted(b - set(sets.negative))} not in the negative set of {sets.state}")
    return len(a) + sets.r_neg - len(b)


def neutral_joint(spec: ModelSpec, config: Mapping[str, int]) -> float:
    """Naive-Bayes probability of a task configuration under the neutral
    state: enacted tasks contribute p_k, the rest (1 - p_k)."""
    factors = []
    for task_id, value in config.items():
        p = spec.neutral_prob(task_id)
        factors.append(p if value else 1.0 - p)
    return math.prod(factors)


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _config_counts(r_pos: int, r_neg: int) -> dict[int, int]:
    """Number of configurations per K value."""
    counts: dict[int, int] = {}
    for a in range(r_pos + 1):
        for b in range(r_neg + 1):
            k = a + r_neg - b
            counts[k] = counts.get(k, 0) + math.comb(r_pos, a) * math.comb(r_neg, b)
    return counts


def _values_by_k(p_plus: float, p0_ref: float, r_total: int, xi: float) -> dict[int, float]:
    """Interpolated probability per K, endpoints pinned exactly."""
    phi_plus = _logit(p_plus)
    phi_0 = _logit(p0_ref)
    values = {0: p0_ref, r_total: p_plus}
    for k in range(1, r_total):
        alpha = (k / r_total) ** xi
        values[k] = _expit(alpha * phi_plus + (1.0 - alpha) * phi_0)
    return values


def _total_mass(p_plus: float, p0_ref: float, r_pos: int, r_neg: int, xi: float) -> float:
    counts = _config_counts(r_pos, r_neg)
    values = _values_by_k(p_plus, p0_ref, r_pos + r_neg, xi)
    return math.fsum(counts[k] * values[k] for k in counts)


def solve_xi(p_plus: float, neutral_probs, r_pos: int, r_neg: int = 0, state: str = "?") -> float:
    """Bisect for the exponent that makes the configuration table sum to one.

    ``neutral_probs`` lists the per-task neutral probabilities, positives
    first (``r_pos`` of them) then negatives. The total mass is monotone in
    the exponent because every interior interpolation weight is, so bisection
    over the fixed bracket is sound. Raises :class:`NoRootError` when the
    mass never crosses one (an elicitation inconsistency).
    """
    probs = list(neutral_probs)
    if len(probs) != r_pos + r_neg:
        raise ValueError(f"expected {r_pos + r_neg} neutral probabilities, got {len(probs)}")
    if not (0.0 < p_plus < 1.0):
        raise ValueError(f"p_plus must be in (0,1), got {p_plus}")
    for p in probs:
        if not (0.0 < p < 1.0):
            raise ValueError(f"neutral probabilities must be in (0,1), got {p}")
    r_total = r_pos + r_neg
    if r_total < 2:
        raise ValueError("interpolation requires at least two relevant tasks")
    p0_ref = math.prod(probs[:r_pos]) * math.prod(1.0 - p for p in probs[r_pos:])

    lo, hi = XI_BRACKET
    f_lo = _total_mass(p_plus, p0_ref, r_pos, r_neg, lo) - 1.0
    f_hi = _total_mass(p_plus, p0_ref, r_pos, r_neg, hi) - 1.0
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise NoRootError(state, f_lo + 1.0, f_hi + 1.0)
    for _ in range(XI_MAX_ITER):
        mid = 0.5 * (lo + hi)
        f_mid = _total_mass(p_plus, p0_ref, r_pos, r_neg, mid) - 1.0
        if abs(f_mid) <= MASS_TOL:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=1024)
def conditional_table(spec: ModelSpec, state_id: str) -> TaskConditionalTable:
    """Full configuration table for one active state.

    Configurations sharing a K value share a probability; the all-positive/
    no-negative endpoint is exactly ``p_plus`` and the opposite endpoint is
    exactly the neutral reference joint.
    """
    sets = index_sets(spec, state_id)
    ordered = relevant_tasks(spec, state_id)
    polarity = tuple(POSITIVE if t in sets.positive else NEGATIVE for t in ordered)
    p_plus = spec.state_p_plus(state_id)
    ref_config = {t: (1 if t in sets.positive else 0) for t in ordered}
    p0_ref = neutral_joint(spec, ref_config)
    r_total = len(ordered)

    if r_total == 1:
        probs = {(1,): p_plus, (0,): 1.0 - p_plus} if polarity[0] == POSITIVE else {
            (0,): p_plus,
            (1,): 1.0 - p_plus,
        }
        return TaskConditionalTable(
            state=state_id,
            task_ids=ordered,
            polarity=polarity,
            probs=probs,
            p_plus=p_plus,
            p0_ref=p0_ref,
            xi=None,
        )

    neutral_probs = [spec.neutral_prob(t) for t in sets.positive] + [
        spec.neutral_prob(t) for t in sets.negative
    ]
    xi = solve_xi(p_plus, neutral_probs, sets.r_pos, sets.r_neg, state=state_id)
    values = _values_by_k(p_plus, p0_ref, r_total, xi)

    probs = {}
    for config in product((0, 1), repeat=r_total):
        k = sum(
            (c if pol == POSITIVE else 1 - c)
            for c, pol in zip(config, polarity)
        )
        probs[config] = values[k]
    return TaskConditionalTable(
        state=state_id,
        task_ids=ordered,
        polarity=polarity,
        probs=probs,
        p_plus=p_plus,
        p0_ref=p0_ref,
        xi=xi,
    )


def all_tables(spec: ModelSpec) -> dict[str, TaskConditionalTable]:
    return {sid: conditional_table(spec, sid) for sid in spec.active_ids}


def task_loglikelihood_ratio(table: TaskConditionalTable, spec: ModelSpec, config) -> float:
    """log p(config | state) - log p(config | neutral) over the state's
    relevant tasks."""
    key = table._as_key(config)
    named = dict(zip(table.task_ids, key))
    return math.log(table.probs[key]) - math.log(neutral_joint(spec, named))


def split_loglikelihood_ratios(
    table: TaskConditionalTable, spec: ModelSpec, config
) -> tuple[float, float]:
    """(positive-set, negative-set) log-likelihood ratios from the table's
    marginals over each split.

    Their sum equals :func:`task_loglikelihood_ratio` exactly when the two
    splits are conditionally independent given the state, in particular
    whenever one split is empty.
    """
    key = table._as_key(config)
    pos_idx = [i for i, pol in enumerate(table.polarity) if pol == POSITIVE]
    neg_idx = [i for i, pol in enumerate(table.polarity) if pol == NEGATIVE]

    def marginal_over(indices):
        if not indices:
            return 1.0
        want = tuple(key[i] for i in indices)
        return math.fsum(
            p for cfg, p in table.probs.items() if tuple(cfg[i] for i in indices) == want
        )

    def neutral_over(indices):
        return neutral_joint(
            spec, {table.task_ids[i]: key[i] for i in indices}
        )

    lam_pos = (
        math.log(marginal_over(pos_idx)) - math.log(neutral_over(pos_idx)) if pos_idx else 0.0
    )
    lam_neg = (
        math.log(marginal_over(neg_idx)) - math.log(neutral_over(neg_idx)) if neg_idx else 0.0
    )
    return lam_pos, lam_neg


def table_rows(spec: ModelSpec) -> tuple[list[str], list[list[str]]]:
    """Tabulate every state's configuration table for CSV export.

    One row per configuration bitstring (over each state's own relevant
    tasks), one column per active state; blank cells where a state has no
    configuration of that width. The final row is each column's total mass.
    """
    tables = all_tables(spec)
    header = ["config"] + list(spec.active_ids)
    by_bits: dict[str, dict[str, float]] = {}
    for sid, table in tables.items():
        for cfg, p in sorted(table.probs.items()):
            bits = "".join(str(c) for c in cfg)
            by_bits.setdefault(bits, {})[sid] = p
    rows = []
    for bits in sorted(by_bits, key=lambda b: (len(b), b)):
        row = [f"np_{bits}"]
        for sid in spec.active_ids:
            value = by_bits[bits].get(sid)
            row.append("" if value is None else f"{value:.5f}")
        rows.append(row)
    totals = ["total"]
    for sid in spec.active_ids:
        totals.append(f"{math.fsum(tables[sid].probs.values()):.5f}")
    rows.append(totals)
    return header, rows
