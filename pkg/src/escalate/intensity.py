"""Observation layer: normalisation, per-task intensity aggregation, and the
shifted asymmetric logistic task-set likelihoods.

Raw observations are normalised against each observable's declared baseline
(``(y - mean) / std``); a task's intensity is the mean of its incident
normalised observables, skipping missing values. The per-task likelihood
``g`` rises slowly below the shift point ``x0`` (rate ``k0``) and sharply
above it (rate ``k1``); the not-enacted curve is the complement, so the two
cross at ``x0`` with value one half.

These likelihoods are bounded scores, not normalised densities in the
intensity: only their ratios across task configurations matter, because the
position update renormalises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .model import LogisticParams, ModelSpec


@dataclass(frozen=True)
class ObservationRecord:
    """One period's raw observations: observable id -> value.

    A missing observable may be absent from ``values`` or mapped to None;
    either way it is excluded from intensity averaging.
    """

    t: float
    values: Mapping[str, float | None] = field(default_factory=dict)

    def value(self, observable_id: str) -> float | None:
        return self.values.get(observable_id)


@dataclass(frozen=True)
class IntensityVector:
    """Filtered intensity per task; None where every incident observable was
    missing (no information for that task this period)."""

    t: float
    z: Mapping[str, float | None] = field(default_factory=dict)

    def get(self, task_id: str) -> float | None:
        return self.z.get(task_id)


def normalize(record: ObservationRecord, spec: ModelSpec) -> dict[str, float | None]:
    """Per-observable ``(y - mean) / std``; missing stays missing."""
    out: dict[str, float | None] = {}
    for obs in spec.observables:
        y = record.value(obs.id)
        out[obs.id] = None if y is None else (float(y) - obs.mean) / obs.std
    return out


def filter_tau(normalized: Mapping[str, float | None], spec: ModelSpec) -> dict[str, float | None]:
    """Mean of present normalised observables incident on each task."""
    out: dict[str, float | None] = {}
    for task in spec.tasks:
        incident = spec.observables_for_task(task.id)
        present = [normalized[o] for o in incident if normalized.get(o) is not None]
        out[task.id] = math.fsum(present) / len(present) if present else None
    return out


def intensities(record: ObservationRecord, spec: ModelSpec) -> IntensityVector:
    """Compose normalisation and the per-task aggregation."""
    return IntensityVector(t=record.t, z=filter_tau(normalize(record, spec), spec))


def logistic_g(x: float, enacted: bool, params: LogisticParams) -> float:
    """Shifted asymmetric logistic likelihood of intensity ``x``.

    Enacted: ``1/(1+exp(-k0(x-x0)))`` below the shift, ``k1`` above it;
    not enacted: the complement. Continuous at the shift (both branches give
    one half), saturating without overflow for extreme inputs.
    """
    k = params.k0 if x < params.x0 else params.k1
    z = k * (x - params.x0)
    if z >= 0:
        g = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        g = e / (1.0 + e)
    return g if enacted else 1.0 - g


def g_pair(z: float | None, params: LogisticParams) -> tuple[float, float]:
    """(enacted, not-enacted) likelihood pair; flat (0.5, 0.5) when the
    intensity is undefined, contributing no information."""
    if z is None:
        return 0.5, 0.5
    g1 = logistic_g(z, True, params)
    return g1, 1.0 - g1


def task_set_likelihood(
    z: Mapping[str, float],
    config: Mapping[str, int],
    spec: ModelSpec,
    mode: str | None = None,
) -> float:
    """Likelihood of the intensities over one task set given a configuration.

    ``average`` mode takes the arithmetic mean of the per-task g values;
    ``product`` multiplies them (the pure-filter factorisation). The task set
    is the key set of ``config``.
    """
    if not config:
        raise ValueError("empty task set")
    mode = mode or spec.likelihood_mode
    gs = []
    for task_id, enacted in config.items():
        params = spec.logistic_params(task_id)
        g1, g0 = g_pair(z.get(task_id), params)
        gs.append(g1 if enacted else g0)
    if mode == "product":
        return math.prod(gs)
    return math.fsum(gs) / len(gs)
