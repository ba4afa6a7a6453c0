"""Semi-Markov transition matrices: construction, powers, evolution, and
absorbing-state variants.

The single-period matrix puts ``1 - zeta_i`` on each active diagonal and
``zeta_i * m0_ij`` off the diagonal, where ``m0`` is the embedded one-jump
matrix with the implied-neutral remainder in its first column. The neutral
row is absorbing. State counts are single digits, so everything is dense.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import ModelSpec, require_valid

ROW_SUM_TOL = 1e-12
CONVERGENCE_TOL = 1e-12
DEFAULT_HORIZON_CAP = 10**6


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic single-period matrix over the model's states."""

    states: tuple[str, ...]
    matrix: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.states):
            raise ValueError("matrix must be square and aligned with states")
        if (m < 0).any():
            raise ValueError("negative transition probability")
        rows = m.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-9:
            raise ValueError(f"rows must be stochastic; sums {rows}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def index(self, state_id: str) -> int:
        return self.states.index(state_id)

    def edge_pattern(self) -> np.ndarray:
        """Boolean off-diagonal nonzero structure (diagonals excluded)."""
        pattern = self.matrix > 0.0
        np.fill_diagonal(pattern, False)
        return pattern


def build_transition_matrix(spec: ModelSpec) -> TransitionMatrix:
    """Single-period matrix from the model's edges and holding parameters."""
    require_valid(spec)
    n = len(spec.states)
    m = np.zeros((n, n))
    m[0, 0] = 1.0
    for i, sid in enumerate(spec.state_ids):
        if i == 0:
            continue
        zeta = spec.holding_params[i - 1]
        jump = {e.dst: e.prob for e in spec.explicit_edges_from(sid)}
        jump[spec.neutral_id] = jump.get(spec.neutral_id, 0.0) + spec.implied_neutral_prob(sid)
        m[i, i] = 1.0 - zeta
        for dst, prob in jump.items():
            j = spec.state_index(dst)
            m[i, j] += zeta * prob
    return TransitionMatrix(states=spec.state_ids, matrix=m)


@lru_cache(maxsize=256)
def cached_transition_matrix(spec: ModelSpec) -> TransitionMatrix:
    return build_transition_matrix(spec)


def matrix_power(tm: TransitionMatrix, k: int) -> TransitionMatrix:
    """k-fold repeated product, k >= 1."""
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"power must be a positive integer, got {k!r}")
    out = tm.matrix
    for _ in range(k - 1):
        out = out @ tm.matrix
    return TransitionMatrix(states=tm.states, matrix=out, period=tm.period * k)


@lru_cache(maxsize=256)
def cached_matrix_power(spec: ModelSpec, k: int) -> TransitionMatrix:
    return matrix_power(cached_transition_matrix(spec), k)


def evolve(dist, tm: TransitionMatrix, n: int) -> np.ndarray:
    """Trajectory of ``dist`` under n single-period advances.

    Returns shape ``(n + 1, n_states)`` including the input distribution.
    """
    d = np.asarray(dist, dtype=float)
    if d.shape != (len(tm.states),):
        raise ValueError(f"distribution shape {d.shape} does not match {len(tm.states)} states")
    if n < 0:
        raise ValueError("period count must be >= 0")
    out = np.empty((n + 1, d.size))
    out[0] = d
    for t in range(n):
        out[t + 1] = out[t] @ tm.matrix
    return out


def make_absorbing(tm: TransitionMatrix, state_id: str) -> TransitionMatrix:
    """Replace one state's row with its unit vector; other rows untouched."""
    i = tm.index(state_id)
    m = tm.matrix.copy()
    m[i] = 0.0
    m[i, i] = 1.0
    return TransitionMatrix(states=tm.states, matrix=m, period=tm.period)


@dataclass(frozen=True)
class EvolutionResult:
    """Long-run evolution up to convergence or a horizon cap."""

    terminal: np.ndarray
    steps: int
    converged: bool
    trajectory: np.ndarray  # subsampled, includes the start and the terminal
    sample_every: int


def evolve_to_convergence(
    dist,
    tm: TransitionMatrix,
    tol: float = CONVERGENCE_TOL,
    cap: int = DEFAULT_HORIZON_CAP,
    sample_every: int | None = None,
) -> EvolutionResult:
    """Advance until the sup-norm change per period drops below ``tol``.

    ``sample_every`` controls trajectory subsampling (default: about 500
    stored points over the cap).
    """
    d = np.asarray(dist, dtype=float)
    if sample_every is None:
        sample_every = max(1, cap // 500)
    samples = [d.copy()]
    steps = 0
    converged = False
    while steps < cap:
        nxt = d @ tm.matrix
        steps += 1
        delta = np.abs(nxt - d).max()
        d = nxt
        if steps % sample_every == 0:
            samples.append(d.copy())
        if delta < tol:
            converged = True
            break
    if steps % sample_every != 0:
        samples.append(d.copy())
    return EvolutionResult(
        terminal=d,
        steps=steps,
        converged=converged,
        trajectory=np.array(samples),
        sample_every=sample_every,
    )


def with_neutral_rate(tm: TransitionMatrix, rate: float) -> TransitionMatrix:
    """Directly set each transient active state's per-period probability of
    moving to neutral, rescaling the rest of its row to keep it stochastic.

    Absorbing rows are left untouched.
    """
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"neutral rate must be in [0, 1), got {rate}")
    m = tm.matrix.copy()
    for i in range(1, len(tm.states)):
        if m[i, i] == 1.0:  # absorbing
            continue
        rest = m[i].copy()
        rest[0] = 0.0
        total = rest.sum()
        if total <= 0.0:
            raise ValueError(f"row {tm.states[i]} has no non-neutral mass to rescale")
        m[i, 0] = rate
        m[i, 1:] = rest[1:] * ((1.0 - rate) / total)
    return TransitionMatrix(states=tm.states, matrix=m, period=tm.period)
