import json
import random
from pathlib import Path

import pytest

from escalate.errors import NoRootError
from escalate.model import (
    EdgeDef,
    LogisticParams,
    ModelSpec,
    ObservableDef,
    StateDef,
    TaskDef,
    parse_model,
    validate_model,
)
from escalate.tasks import conditional_table

REPO = Path(__file__).resolve().parent.parent
MODELS = REPO / "models"
SCENARIOS = REPO / "scenarios"


@pytest.fixture(scope="session")
def vehicle_doc() -> dict:
    return json.loads((MODELS / "vehicle_attack.json").read_text())


@pytest.fixture(scope="session")
def vehicle_spec() -> ModelSpec:
    return parse_model((MODELS / "vehicle_attack.json").read_text())


@pytest.fixture(scope="session")
def murder_spec() -> ModelSpec:
    return parse_model((MODELS / "murder_plot.json").read_text())


def make_toy_spec(
    n_active=1,
    priors=(0.5, 0.5),
    p_plus=(0.4,),
    neutral=(0.02,),
    zeta=(0.01,),
    mode="average",
) -> ModelSpec:
    """Minimal spec: one evidence-only task per active state."""
    states = [StateDef("n", "Neutral")] + [StateDef(f"w{i}", f"W{i}") for i in range(1, n_active + 1)]
    tasks = tuple(TaskDef(f"th{i}", f"Task {i}", evidence_only=True) for i in range(1, n_active + 1))
    incidence = tuple((f"th{i}", f"w{i}", 1) for i in range(1, n_active + 1))
    return ModelSpec(
        states=tuple(states),
        edges=(),
        priors=tuple(priors),
        tasks=tasks,
        task_state_incidence=incidence,
        neutral_task_probs=tuple(neutral),
        p_plus=tuple(p_plus),
        observables=(),
        observable_task_incidence=(),
        likelihood_params=tuple(LogisticParams() for _ in tasks),
        likelihood_mode=mode,
        holding_params=tuple(zeta),
        substeps_k=1,
        score_weights=tuple(float(i) for i in range(n_active + 1)),
    )


def random_model(rng: random.Random) -> ModelSpec:
    """Small random valid model (<=3 active states, <=3 tasks) whose task
    tables are all solvable."""
    for _ in range(200):
        n_active = rng.randint(1, 3)
        n_tasks = rng.randint(1, 3)
        states = [StateDef("n", "Neutral")] + [
            StateDef(f"s{i}", f"State {i}") for i in range(1, n_active + 1)
        ]
        tasks = [TaskDef(f"t{j}", f"Task {j}") for j in range(1, n_tasks + 1)]

        incidence = []
        for i in range(1, n_active + 1):
            picked = rng.sample(range(n_tasks), rng.randint(1, n_tasks))
            for j in picked:
                polarity = 1 if rng.random() < 0.75 else -1
                incidence.append((tasks[j].id, f"s{i}", polarity))
        used = {t for t, _s, _p in incidence}
        if used != {t.id for t in tasks}:
            continue  # keep every task relevant to some state

        raw = [rng.uniform(0.05, 1.0) for _ in states]
        total = sum(raw)
        priors = tuple(v / total for v in raw)

        edges = []
        for i in range(1, n_active + 1):
            budget = rng.uniform(0.0, 0.9)
            targets = [k for k in range(1, n_active + 1) if k != i and rng.random() < 0.6]
            if targets:
                share = budget / len(targets)
                for k in targets:
                    edges.append(EdgeDef(f"s{i}", f"s{k}", share))

        observables = []
        obs_incidence = []
        for j, task in enumerate(tasks):
            for c in range(rng.randint(1, 2)):
                oid = f"o{j}_{c}"
                observables.append(
                    ObservableDef(oid, oid, mean=rng.uniform(-1, 1), std=rng.uniform(0.5, 2.0))
                )
                obs_incidence.append((oid, task.id))

        spec = ModelSpec(
            states=tuple(states),
            edges=tuple(edges),
            priors=priors,
            tasks=tuple(tasks),
            task_state_incidence=tuple(sorted(incidence, key=lambda x: (x[0], x[1]))),
            neutral_task_probs=tuple(rng.uniform(0.03, 0.5) for _ in tasks),
            p_plus=tuple(rng.uniform(0.25, 0.6) for _ in range(n_active)),
            observables=tuple(observables),
            observable_task_incidence=tuple(obs_incidence),
            likelihood_params=tuple(
                LogisticParams(
                    x0=rng.uniform(0.3, 1.5), k0=rng.uniform(0.5, 3.0), k1=rng.uniform(2.0, 6.0)
                )
                for _ in tasks
            ),
            likelihood_mode=rng.choice(["average", "product"]),
            holding_params=tuple(rng.uniform(0.05, 0.4) for _ in range(n_active)),
            substeps_k=rng.choice([1, 2]),
            score_weights=tuple(float(i) for i in range(n_active + 1)),
        )
        if not validate_model(spec).ok:
            continue
        try:
            for sid in spec.active_ids:
                conditional_table(spec, sid)
        except NoRootError:
            continue
        return spec
    raise RuntimeError("failed to draw a solvable random model")


def random_steps(rng: random.Random, spec: ModelSpec, periods: int):
    """Random observation/evidence periods: (record_values | None, clamps |
    None) pairs, timestamps 1..periods."""
    steps = []
    for _ in range(periods):
        kind = rng.random()
        record = None
        clamps = None
        if kind < 0.75:
            record = {}
            for obs in spec.observables:
                if rng.random() < 0.8:
                    record[obs.id] = rng.gauss(obs.mean, 2.0 * obs.std)
        if kind >= 0.6:
            clamps = {
                t.id: rng.randint(0, 1)
                for t in spec.tasks
                if rng.random() < 0.5
            }
            if not clamps:
                clamps = {rng.choice(spec.task_ids): rng.randint(0, 1)}
        if record is None and clamps is None:
            record = {}
        steps.append((record, clamps))
    return steps
