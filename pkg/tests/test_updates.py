import numpy as np
import pytest

from evcoord.central import lagrangian_value
from evcoord.cost import derive_cost_coefficients
from evcoord.distributed import (
    AgentState,
    TuningSchedule,
    load_estimate_update,
    mu_update,
    price_update,
    schedule_update,
    step_sizes,
)
from evcoord.fleet import EnergyConstraintSet, PowerBounds, PevSpec, TimeGrid
from evcoord.problem import ChargingProblem


def make_state(x, load, price, mu):
    return AgentState(
        x=np.asarray(x, dtype=float),
        load_estimate=np.asarray(load, dtype=float),
        price=np.asarray(price, dtype=float),
        mu=np.asarray(mu, dtype=float),
    )


def sched(alpha0=0.05, beta0=0.1, gamma=0.5, delta=0.1):
    return TuningSchedule(alpha0=alpha0, beta0=beta0, gamma=gamma, delta=delta)


class TestStepSizes:
    def test_initial_values(self):
        s = TuningSchedule(alpha0=0.3, beta0=0.7, gamma=0.2, delta=0.05)
        assert step_sizes(s, 0) == (0.3, 0.7, 0.2, 0.05)

    def test_ratio_diverges(self):
        s = TuningSchedule(alpha0=1.0, beta0=1.0, gamma=1.0, delta=1.0,
                           tau_alpha=0.6, tau_beta=0.51)
        ratios = []
        for k in (10, 1000, 100000, 10**7):
            alpha, beta, _, _ = step_sizes(s, k)
            ratios.append(beta / alpha)
            assert beta / alpha == pytest.approx((k + 1) ** 0.09)
        assert ratios == sorted(ratios)

    def test_partial_sums_unbounded(self):
        s = TuningSchedule(alpha0=1.0, beta0=1.0, gamma=1.0, delta=1.0)
        ks = np.arange(200000)
        alphas = s.alpha0 / (ks + 1) ** s.tau_alpha
        betas = s.beta0 / (ks + 1) ** s.tau_beta
        # p-series with exponent <= 1: partial sums pass any fixed threshold
        assert alphas.sum() > 100
        assert betas.sum() > 100

    def test_decay_constraint_enforced(self):
        with pytest.raises(ValueError):
            TuningSchedule(alpha0=1, beta0=1, gamma=1, delta=1,
                           tau_alpha=0.5, tau_beta=0.6)
        with pytest.raises(ValueError):
            TuningSchedule(alpha0=0, beta0=1, gamma=1, delta=1)

    def test_negative_iteration_rejected(self):
        with pytest.raises(ValueError):
            step_sizes(sched(), -1)


class TestPriceUpdate:
    def test_fixed_point_when_agreed_and_balanced(self):
        price = np.array([1.5, 2.0])
        state = make_state([0.5, 1.0], [1.0, 2.0], price, [0.0])
        out = price_update(state, [price.copy(), price.copy()], fleet_size=2, k=0,
                           sched=sched())
        np.testing.assert_array_equal(out, price)

    def test_scalar_example(self):
        state = make_state([1.5], [10.0], [2.0], [0.0])
        out = price_update(state, [np.array([4.0])], fleet_size=10, k=0,
                           sched=sched(alpha0=0.05, beta0=0.1))
        assert out[0] == pytest.approx(2.225)

    def test_overconsumption_raises_price(self):
        price = np.array([1.0])
        state = make_state([2.0], [10.0], price, [0.0])  # x > L/V = 1
        out = price_update(state, [price.copy()], fleet_size=10, k=0, sched=sched())
        assert out[0] > price[0]

    def test_rejects_bad_fleet_size(self):
        state = make_state([1.0], [1.0], [1.0], [0.0])
        with pytest.raises(ValueError):
            price_update(state, [], fleet_size=0, k=0, sched=sched())

    def test_rejects_length_mismatch(self):
        state = make_state([1.0], [1.0], [1.0], [0.0])
        with pytest.raises(ValueError):
            price_update(state, [np.zeros(2)], fleet_size=2, k=0, sched=sched())


class TestLoadEstimateUpdate:
    def test_price_at_base_cost_gives_zero(self):
        cost = derive_cost_coefficients(0.0, 1.0, np.array([2.0, 3.0]))
        state = make_state([0, 0], [0, 0], cost.c2.copy(), [0.0])
        np.testing.assert_array_equal(load_estimate_update(state, cost), [0.0, 0.0])

    def test_projection_clips_below_zero(self):
        cost = derive_cost_coefficients(0.0, 1.0, np.array([2.0, 3.0]))  # c2 = [4, 6]
        state = make_state([0, 0], [0, 0], [3.0, 7.0], [0.0])
        out = load_estimate_update(state, cost)
        assert out[0] == 0.0  # price below marginal base cost
        assert out[1] == pytest.approx(0.5)

    def test_componentwise_formula(self):
        cost = derive_cost_coefficients(0.0, 1.0, np.array([2.0, 2.0]))  # c2 = [4, 4]
        state = make_state([0, 0], [0, 0], [10.0, 2.0], [0.0])
        np.testing.assert_allclose(load_estimate_update(state, cost), [3.0, 0.0])


class TestScheduleUpdate:
    def test_zero_pressure_keeps_schedule(self):
        cons = EnergyConstraintSet(a_matrix=np.array([[1.0]]), b_vector=np.array([5.0]))
        bounds = PowerBounds(lower=np.zeros(1), upper=np.full(1, 11.0))
        state = make_state([5.0], [0.0], [0.0], [0.0])
        np.testing.assert_array_equal(schedule_update(state, cons, bounds, sched()), [5.0])

    def test_high_price_drives_to_lower_bound(self):
        cons = EnergyConstraintSet(a_matrix=np.array([[1.0]]), b_vector=np.array([5.0]))
        bounds = PowerBounds(lower=np.zeros(1), upper=np.full(1, 11.0))
        state = make_state([5.0], [0.0], [1e6], [0.0])
        np.testing.assert_array_equal(
            schedule_update(state, cons, bounds, sched(delta=0.1)), [0.0]
        )

    def test_scalar_example(self):
        cons = EnergyConstraintSet(a_matrix=np.array([[1.0]]), b_vector=np.array([5.0]))
        bounds = PowerBounds(lower=np.zeros(1), upper=np.full(1, 11.0))
        state = make_state([5.0], [0.0], [1.0], [2.0])
        out = schedule_update(state, cons, bounds, sched(delta=0.1))
        assert out[0] == pytest.approx(4.7)


class TestMuUpdate:
    def test_slack_rows_stay_zero(self):
        cons = EnergyConstraintSet(a_matrix=np.array([[1.0]]), b_vector=np.array([5.0]))
        state = make_state([1.0], [0.0], [0.0], [0.0])
        np.testing.assert_array_equal(mu_update(state, cons, sched(gamma=0.5)), [0.0])

    def test_tight_rows_keep_multiplier(self):
        cons = EnergyConstraintSet(a_matrix=np.array([[1.0]]), b_vector=np.array([5.0]))
        state = make_state([5.0], [0.0], [0.0], [1.3])
        np.testing.assert_array_equal(mu_update(state, cons, sched(gamma=0.5)), [1.3])

    def test_violation_grows_multiplier(self):
        cons = EnergyConstraintSet(a_matrix=np.array([[1.0]]), b_vector=np.array([5.0]))
        state = make_state([7.0], [0.0], [0.0], [1.0])  # A x - b = 2
        np.testing.assert_allclose(mu_update(state, cons, sched(gamma=0.5)), [2.0])


def small_problem():
    grid = TimeGrid(3, 1.0)
    specs = [
        PevSpec("a", 12.0, 0.2, 0.9, 8.0, 6.0, [1, 0, 1], [0.0, 1.5, 0.0]),
        PevSpec("b", 16.0, 0.1, 0.8, 6.0, 9.0, [0, 1, 1], [1.0, 0.0, 0.0]),
    ]
    cost = derive_cost_coefficients(0.1, 5e-3, np.array([40.0, 55.0, 30.0]))
    return ChargingProblem.build(specs, grid, cost)


class TestGradientConsistency:
    def test_update_directions_match_finite_differences(self):
        # the gradient expressions inside the four updates against centered
        # differences of the Lagrangian at 100 random points
        problem = small_problem()
        rng = np.random.default_rng(123)
        n_rows = problem.constraints[0].num_rows
        v_count, t_count = problem.num_vehicles, problem.num_steps

        def check(analytic, fd):
            assert abs(analytic - fd) <= 1e-6 * (1.0 + abs(analytic))

        for _ in range(100):
            load = rng.uniform(0, 10, t_count)
            xs = rng.uniform(0, 8, (v_count, t_count))
            price = rng.uniform(-2, 2, t_count)
            mus = rng.uniform(0, 2, (v_count, n_rows))
            h = 1e-4

            def value(load=load, xs=xs, price=price, mus=mus):
                return lagrangian_value(problem, load, xs, price, mus)

            grad_load = 2 * problem.cost.c1 * load + problem.cost.c2 - price
            t = rng.integers(t_count)
            bump = np.zeros(t_count); bump[t] = h
            check(grad_load[t], (value(load=load + bump) - value(load=load - bump)) / (2 * h))

            v = rng.integers(v_count)
            grad_x = price + problem.constraints[v].a_matrix.T @ mus[v]
            xs_hi, xs_lo = xs.copy(), xs.copy()
            xs_hi[v, t] += h; xs_lo[v, t] -= h
            check(grad_x[t], (value(xs=xs_hi) - value(xs=xs_lo)) / (2 * h))

            grad_mu = problem.constraints[v].a_matrix @ xs[v] - problem.constraints[v].b_vector
            r = rng.integers(n_rows)
            mus_hi, mus_lo = mus.copy(), mus.copy()
            mus_hi[v, r] += h; mus_lo[v, r] -= h
            check(grad_mu[r], (value(mus=mus_hi) - value(mus=mus_lo)) / (2 * h))

            grad_price = xs.sum(axis=0) - load
            check(grad_price[t], (value(price=price + bump) - value(price=price - bump)) / (2 * h))
