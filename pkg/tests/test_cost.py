import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evcoord.cost import derive_cost_coefficients, evaluate_objective, scale_for_fleet_share


class TestDeriveCoefficients:
    def test_pure_quadratic(self):
        model = derive_cost_coefficients(0.0, 1.0, np.array([0.0, 0.0]))
        assert model.c1 == 1.0
        np.testing.assert_allclose(model.c2, [0.0, 0.0])

    def test_affine_inelastic(self):
        model = derive_cost_coefficients(1.0, 2.0, np.array([3.0, 5.0]))
        assert model.c1 == 2.0
        np.testing.assert_allclose(model.c2, [13.0, 21.0])

    def test_rejects_nonpositive_curvature(self):
        with pytest.raises(ValueError):
            derive_cost_coefficients(0.0, 0.0, np.array([1.0]))
        with pytest.raises(ValueError):
            derive_cost_coefficients(0.0, -1.0, np.array([1.0]))

    def test_rejects_negative_inelastic(self):
        with pytest.raises(ValueError):
            derive_cost_coefficients(0.0, 1.0, np.array([-1.0, 2.0]))


class TestEvaluateObjective:
    def test_simple_quadratic(self):
        model = derive_cost_coefficients(0.0, 1.0, np.array([0.0, 0.0]))
        assert evaluate_objective(model, np.array([2.0, 3.0])) == pytest.approx(13.0)

    def test_zero_load(self):
        model = derive_cost_coefficients(1.0, 2.0, np.array([3.0, 5.0]))
        assert evaluate_objective(model, np.zeros(2)) == 0.0

    def test_affine_case(self):
        model = derive_cost_coefficients(1.0, 2.0, np.array([3.0, 5.0]))
        assert evaluate_objective(model, np.ones(2)) == pytest.approx(38.0)

    def test_dimension_mismatch(self):
        model = derive_cost_coefficients(0.0, 1.0, np.array([0.0, 0.0]))
        with pytest.raises(ValueError):
            evaluate_objective(model, np.zeros(3))

    @given(
        st.lists(st.floats(-50, 50), min_size=3, max_size=3),
        st.lists(st.floats(-50, 50), min_size=3, max_size=3),
        st.floats(0, 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_convexity(self, load_a, load_b, theta):
        model = derive_cost_coefficients(0.5, 2.0, np.array([1.0, 4.0, 2.0]))
        load_a, load_b = np.array(load_a), np.array(load_b)
        mixed = theta * load_a + (1 - theta) * load_b
        lhs = evaluate_objective(model, mixed)
        rhs = theta * evaluate_objective(model, load_a) + (1 - theta) * evaluate_objective(model, load_b)
        assert lhs <= rhs + 1e-7 * (1 + abs(rhs))


class TestArgminInvariance:
    def test_constant_shift_preserves_minimizer(self):
        # brute-force the minimizer over a discrete feasible set with and
        # without the constant term dropped by the coefficient fold
        inelastic = np.array([3.0, 1.0])
        a_tilde, b_tilde = 0.5, 1.5
        model = derive_cost_coefficients(a_tilde, b_tilde, inelastic)
        candidates = [np.array(p) for p in itertools.product(np.linspace(0, 2, 21), repeat=2)]

        def serving_cost(load):
            total = load + inelastic
            return a_tilde * total.sum() + b_tilde * total @ total

        reduced_best = min(candidates, key=lambda p: evaluate_objective(model, p))
        full_best = min(candidates, key=serving_cost)
        np.testing.assert_allclose(reduced_best, full_best)

    def test_objectives_differ_by_constant(self):
        inelastic = np.array([3.0, 1.0])
        a_tilde, b_tilde = 0.5, 1.5
        model = derive_cost_coefficients(a_tilde, b_tilde, inelastic)
        constant = a_tilde * inelastic.sum() + b_tilde * inelastic @ inelastic
        rng = np.random.default_rng(1)
        for _ in range(20):
            load = rng.uniform(0, 5, size=2)
            total = load + inelastic
            full = a_tilde * total.sum() + b_tilde * total @ total
            assert full - evaluate_objective(model, load) == pytest.approx(constant)


class TestFleetShareScaling:
    def test_share_reached_exactly(self):
        inelastic = np.array([10.0, 20.0, 15.0, 5.0])
        step_hours = 0.25
        fleet_energy = 7.5
        factor = scale_for_fleet_share(inelastic, fleet_energy, step_hours, share=0.1)
        scaled_energy = float(inelastic.sum()) * factor * step_hours
        share = fleet_energy / (fleet_energy + scaled_energy)
        assert share == pytest.approx(0.1)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            scale_for_fleet_share(np.array([1.0]), 1.0, 0.25, share=0.0)
        with pytest.raises(ValueError):
            scale_for_fleet_share(np.zeros(3), 1.0, 0.25)
