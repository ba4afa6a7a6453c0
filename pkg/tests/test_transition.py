import random

import numpy as np
import pytest

from escalate.transition import (
    build_transition_matrix,
    evolve,
    evolve_to_convergence,
    make_absorbing,
    matrix_power,
    with_neutral_rate,
)

from conftest import make_toy_spec, random_model
import oracle


def two_state_spec(zeta=0.01):
    # Single active state, all transition flux into neutral.
    return make_toy_spec(priors=(0.05, 0.95), zeta=(zeta,))


class TestBuild:
    def test_active_row_values(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        a = tm.index("A")
        # zeta=0.01; edges A->T 0.4, A->P 0.3, implied A->N 0.3
        np.testing.assert_allclose(tm.matrix[a], [0.003, 0.99, 0.004, 0.003, 0.0], atol=1e-15)

    def test_neutral_row_absorbing(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        assert tm.matrix[0, 0] == 1.0
        assert tm.matrix[0, 1:].sum() == 0.0

    def test_rows_stochastic(self, vehicle_spec, murder_spec):
        for spec in (vehicle_spec, murder_spec):
            tm = build_transition_matrix(spec)
            np.testing.assert_allclose(tm.matrix.sum(axis=1), 1.0, atol=1e-12)
            assert (tm.matrix >= 0).all()

    def test_zero_zeta_limit(self):
        # zeta -> 0 freezes every active state; exactly zero is invalid per
        # the holding range, so check the off-diagonal mass scales with zeta.
        spec = two_state_spec(zeta=1e-12)
        tm = build_transition_matrix(spec)
        assert tm.matrix[1, 1] == pytest.approx(1.0, abs=1e-11)

    def test_murder_plot_sparsity_pattern(self, murder_spec):
        tm = build_transition_matrix(murder_spec)
        # Off-diagonal structure of the murder-plot jump graph, neutral
        # column included (every active state can drop out).
        expected = np.array(
            [
                [0, 0, 0, 0, 0, 0],
                [1, 0, 1, 1, 0, 0],
                [1, 1, 0, 0, 1, 0],
                [1, 0, 0, 0, 1, 0],
                [1, 0, 0, 1, 0, 1],
                [1, 0, 0, 0, 1, 0],
            ],
            dtype=bool,
        )
        np.testing.assert_array_equal(tm.edge_pattern(), expected)

    def test_matches_oracle_matrix(self, vehicle_spec, murder_spec):
        for spec in (vehicle_spec, murder_spec):
            tm = build_transition_matrix(spec)
            np.testing.assert_allclose(tm.matrix, oracle.build_matrix(spec), atol=1e-15)


class TestPower:
    def test_k1_unchanged(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        np.testing.assert_array_equal(matrix_power(tm, 1).matrix, tm.matrix)

    def test_k0_rejected(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        with pytest.raises(ValueError):
            matrix_power(tm, 0)

    def test_two_state_square(self):
        tm = build_transition_matrix(two_state_spec(zeta=0.01))
        m2 = matrix_power(tm, 2)
        assert m2.matrix[1, 1] == pytest.approx(0.99**2, abs=1e-15)

    def test_rows_stay_stochastic(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        for k in (2, 5, 17):
            rows = matrix_power(tm, k).matrix.sum(axis=1)
            np.testing.assert_allclose(rows, 1.0, atol=1e-9)

    def test_power_equals_fold_evolve_on_basis(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        n = len(tm.states)
        for k in (1, 3, 7):
            mk = matrix_power(tm, k).matrix
            for i in range(n):
                basis = np.zeros(n)
                basis[i] = 1.0
                folded = evolve(basis, tm, k)[-1]
                np.testing.assert_allclose(mk[i], folded, atol=1e-12)


class TestEvolve:
    def test_zero_periods(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        traj = evolve(vehicle_spec.priors, tm, 0)
        assert traj.shape == (1, 5)
        np.testing.assert_array_equal(traj[0], vehicle_spec.priors)

    def test_geometric_decay_closed_form(self):
        spec = two_state_spec(zeta=0.01)
        tm = build_transition_matrix(spec)
        traj = evolve((0.05, 0.95), tm, 200)
        for n in (1, 50, 200):
            assert traj[n, 1] == pytest.approx(0.95 * 0.99**n, rel=1e-12)

    def test_semigroup_property(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        rng = random.Random(7)
        for _ in range(5):
            a, b = rng.randint(0, 20), rng.randint(0, 20)
            whole = evolve(vehicle_spec.priors, tm, a + b)[-1]
            parts = evolve(evolve(vehicle_spec.priors, tm, a)[-1], tm, b)[-1]
            np.testing.assert_allclose(whole, parts, atol=1e-12)

    def test_neutral_mass_goes_to_one(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        result = evolve_to_convergence(vehicle_spec.priors, tm)
        assert result.converged
        assert result.terminal[0] > 1 - 1e-6

    def test_dimension_mismatch(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        with pytest.raises(ValueError):
            evolve((0.5, 0.5), tm, 1)


class TestAbsorbing:
    def test_neutral_already_absorbing(self, vehicle_spec):
        tm = build_transition_matrix(vehicle_spec)
        same = make_absorbing(tm, "N")
        np.testing.assert_array_equal(same.matrix, tm.matrix)

    def test_two_absorbing_terminal_mass(self, vehicle_spec):
        tm = make_absorbing(build_transition_matrix(vehicle_spec), "M")
        result = evolve_to_convergence(vehicle_spec.priors, tm)
        others = [result.terminal[tm.index(s)] for s in ("A", "T", "P")]
        assert max(others) < 1e-9
        assert result.terminal[tm.index("N")] + result.terminal[tm.index("M")] == pytest.approx(1.0)

    def test_neutral_rate_sweep_monotone(self, vehicle_spec):
        tm = make_absorbing(build_transition_matrix(vehicle_spec), "M")
        terminal_neutral = []
        for rate in np.linspace(0.01, 0.99, 8):
            swept = with_neutral_rate(tm, float(rate))
            result = evolve_to_convergence(vehicle_spec.priors, swept)
            terminal_neutral.append(result.terminal[0])
        assert all(b >= a - 1e-12 for a, b in zip(terminal_neutral, terminal_neutral[1:]))

    def test_random_models_structural(self):
        rng = random.Random(20240818)
        for _ in range(20):
            spec = random_model(rng)
            tm = build_transition_matrix(spec)
            np.testing.assert_allclose(tm.matrix.sum(axis=1), 1.0, atol=1e-12)
            assert tm.matrix[0, 0] == 1.0
            # off-diagonal sparsity equals the declared graph plus neutral leak
            for i, src in enumerate(spec.state_ids):
                for j, dst in enumerate(spec.state_ids):
                    if i == j or i == 0:
                        continue
                    declared = any(e.src == src and e.dst == dst and e.prob > 0 for e in spec.edges)
                    if j == 0:
                        declared = declared or spec.implied_neutral_prob(src) > 0
                    assert (tm.matrix[i, j] > 0) == declared
