"""Escalation-inference engine.

Tracks the posterior probability that a monitored individual occupies each
stage of a latent escalation process: a semi-Markov position layer, a binary
task layer elicited against a neutral baseline, and routinely observed
intensities filtered per task. Supports live evidence entry, what-if
analysis, sensitivity sweeps, and long-run diagnostics.
"""

from .engine import (
    Annotation,
    CaseState,
    EvidenceEvent,
    TimelinePoint,
    condition_on_tasks,
    log_odds_timeline,
    new_case,
    position_score,
    predict,
    replay,
    step,
    update,
    whatif,
)
from .errors import (
    ContradictoryEvidenceError,
    EscalateError,
    FlatEvidenceError,
    InvalidModelError,
    ModelFormatError,
    NoRootError,
)
from .intensity import (
    IntensityVector,
    ObservationRecord,
    filter_tau,
    intensities,
    logistic_g,
    normalize,
    task_set_likelihood,
)
from .model import (
    ChildState,
    EdgeDef,
    LogisticParams,
    ModelSpec,
    ObservableDef,
    StateDef,
    TaskDef,
    ValidationReport,
    coarsen,
    parse_model,
    refine,
    serialize_model,
    validate_model,
)
from .scenarios import (
    Scenario,
    SweepSpec,
    load_scenario,
    longrun_report,
    prior_sensitivity,
    run_scenario,
    structure_robustness,
    zeta_sensitivity,
)
from .tasks import (
    TaskConditionalTable,
    TaskIndexSets,
    conditional_table,
    index_sets,
    k_statistic,
    neutral_joint,
    solve_xi,
    task_loglikelihood_ratio,
)
from .transition import (
    TransitionMatrix,
    build_transition_matrix,
    evolve,
    evolve_to_convergence,
    make_absorbing,
    matrix_power,
)

__version__ = "0.1.0"
