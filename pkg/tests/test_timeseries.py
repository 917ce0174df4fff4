import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regmarket import (
    AgentSeries,
    InvalidInputError,
    LagSpec,
    SyntheticSpec,
    build_lag_matrix,
    generate_ar1,
    generate_var_dependent,
    ols_fit,
    synthetic_market_series,
)


def series(agent_id, values, start_time=0):
    return AgentSeries(agent_id=agent_id, values=np.asarray(values, float), start_time=start_time)


class TestAgentSeries:
    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            series("A", [1.0, np.nan])

    def test_rejects_bad_start(self):
        with pytest.raises(InvalidInputError):
            series("A", [1.0, 2.0], start_time=5)

    def test_window_slice(self):
        s = series("A", [9.0, 1.0, 2.0, 3.0], start_time=1)
        assert np.array_equal(s.window(2), [1.0, 2.0])
        with pytest.raises(InvalidInputError):
            s.window(4)


class TestBuildLagMatrix:
    def test_single_agent_lag_one(self):
        s = series("A", [10.0, 11.0, 12.0], start_time=1)
        design = build_lag_matrix([s], LagSpec(max_lag=1, window_length=2))
        assert np.array_equal(design.values, [[1.0, 10.0], [1.0, 11.0]])
        assert design.column_map == (None, ("A", 1))

    def test_default_study_shape(self):
        roster = synthetic_market_series(SyntheticSpec(seed=0), history=3, window=240)
        design = build_lag_matrix(roster, LagSpec(max_lag=3, window_length=240))
        assert design.values.shape == (240, 16)
        assert len(design.column_map) == 16

    def test_two_agents_hand_layout(self):
        a = series("A", [1.0, 2.0, 3.0, 4.0, 5.0], start_time=2)
        b = series("B", [10.0, 20.0, 30.0, 40.0, 50.0], start_time=2)
        design = build_lag_matrix([a, b], LagSpec(max_lag=2, window_length=3))
        expected = np.array(
            [
                # 1, a[t-2], a[t-1], b[t-2], b[t-1] for window rows t = 1..3
                [1.0, 1.0, 2.0, 10.0, 20.0],
                [1.0, 2.0, 3.0, 20.0, 30.0],
                [1.0, 3.0, 4.0, 30.0, 40.0],
            ]
        )
        assert np.array_equal(design.values, expected)
        assert design.column_map == (None, ("A", 2), ("A", 1), ("B", 2), ("B", 1))

    def test_block_order_is_oldest_lag_first(self):
        s = series("A", np.arange(10.0), start_time=3)
        design = build_lag_matrix([s], LagSpec(max_lag=3, window_length=4))
        assert design.column_map == (None, ("A", 3), ("A", 2), ("A", 1))

    def test_insufficient_history_names_agent(self):
        s = series("farm-7", np.arange(10.0), start_time=1)
        with pytest.raises(InvalidInputError, match="farm-7"):
            build_lag_matrix([s], LagSpec(max_lag=3, window_length=2))

    def test_window_past_series_end_rejected(self):
        s = series("A", np.arange(5.0), start_time=2)
        with pytest.raises(InvalidInputError, match="missing 2"):
            build_lag_matrix([s], LagSpec(max_lag=2, window_length=5))

    def test_without_intercept(self):
        s = series("A", np.arange(6.0), start_time=2)
        design = build_lag_matrix([s], LagSpec(max_lag=2, window_length=3), include_intercept=False)
        assert design.column_map == (("A", 2), ("A", 1))
        assert design.values.shape == (3, 2)

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        max_lag=st.integers(1, 4),
        window=st.integers(1, 12),
        extra_history=st.integers(0, 3),
    )
    def test_lag_alignment(self, seed, max_lag, window, extra_history):
        rng = np.random.default_rng(seed)
        start = max_lag + extra_history
        roster = [
            series(f"A{k}", rng.normal(size=start + window + 2), start_time=start)
            for k in range(int(rng.integers(1, 4)))
        ]
        design = build_lag_matrix(roster, LagSpec(max_lag=max_lag, window_length=window))
        for _ in range(10):
            row = int(rng.integers(0, window))
            agent = roster[int(rng.integers(0, len(roster)))]
            lag = int(rng.integers(1, max_lag + 1))
            column = design.column_of(agent.agent_id, lag)
            assert design.values[row, column] == agent.values[start + row - lag]


class TestGenerateAr1:
    def test_white_noise_has_no_autocorrelation(self):
        s = generate_ar1(0.0, 1.0, 10_000, seed=5)
        x = s.values
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert abs(r1) < 0.1

    def test_autocorrelation_matches_phi(self):
        s = generate_ar1(0.7, 1.0, 10_000, seed=6)
        x = s.values
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert abs(r1 - 0.7) < 0.05

    def test_deterministic_given_seed(self):
        a = generate_ar1(0.4, 1.5, 500, seed=42)
        b = generate_ar1(0.4, 1.5, 500, seed=42)
        assert np.array_equal(a.values, b.values)
        c = generate_ar1(0.4, 1.5, 500, seed=43)
        assert not np.array_equal(a.values, c.values)

    @pytest.mark.parametrize("phi,std", [(0.7, 1.0), (0.3, 2.0), (-0.5, 0.5)])
    def test_stationary_moments(self, phi, std):
        s = generate_ar1(phi, std, 20_000, seed=9)
        x = s.values
        target_var = std**2 / (1 - phi**2)
        assert abs(x.mean()) < 0.1 * np.sqrt(target_var)
        assert abs(x.var() - target_var) < 0.1 * target_var

    def test_non_stationary_rejected(self):
        with pytest.raises(InvalidInputError):
            generate_ar1(1.0, 1.0, 100, seed=0)
        with pytest.raises(InvalidInputError):
            generate_ar1(-1.2, 1.0, 100, seed=0)

    def test_bad_arguments_rejected(self):
        with pytest.raises(InvalidInputError):
            generate_ar1(0.5, 0.0, 100, seed=0)
        with pytest.raises(InvalidInputError):
            generate_ar1(0.5, 1.0, 0, seed=0)


class TestGenerateVarDependent:
    def test_zero_cross_reduces_to_ar1(self):
        drivers = [generate_ar1(0.5, 1.0, 300, seed=k) for k in range(3)]
        dependent = generate_var_dependent(drivers, [0.0, 0.0, 0.0], 0.35, 0.8, seed=77)
        plain = generate_ar1(0.35, 0.8, 300, seed=77)
        assert np.array_equal(dependent.values, plain.values)

    def test_recovers_generative_coefficients(self):
        spec = SyntheticSpec(seed=21)
        roster = synthetic_market_series(spec, history=1, window=10_000)
        design = build_lag_matrix(roster, LagSpec(max_lag=1, window_length=10_000))
        beta = ols_fit(design, roster[0].window(10_000))
        expected = {("P1", 1): spec.dependent_phi}
        for agent, coefficient in zip(spec.agent_ids[1:], spec.cross_coefficients):
            expected[(agent, 1)] = coefficient
        for (agent, lag), value in expected.items():
            assert abs(beta[design.column_of(agent, lag)] - value) < 0.05

    def test_noiseless_single_driver_is_shifted_copy(self):
        driver = generate_ar1(0.6, 1.0, 200, seed=3)
        dependent = generate_var_dependent([driver], [1.0], 0.0, 1e-12, seed=4)
        assert np.allclose(dependent.values[1:], driver.values[:-1], atol=1e-9)

    def test_driver_length_mismatch_rejected(self):
        a = generate_ar1(0.5, 1.0, 100, seed=0)
        b = generate_ar1(0.5, 1.0, 101, seed=1)
        with pytest.raises(InvalidInputError):
            generate_var_dependent([a, b], [0.1, 0.2], 0.2, 1.0, seed=2)

    def test_coefficient_count_mismatch_rejected(self):
        a = generate_ar1(0.5, 1.0, 100, seed=0)
        with pytest.raises(InvalidInputError):
            generate_var_dependent([a], [0.1, 0.2], 0.2, 1.0, seed=2)


class TestSyntheticSpec:
    def test_defaults_are_consistent(self):
        spec = SyntheticSpec()
        assert spec.agent_ids == ("P1", "P2", "P3", "P4", "P5")

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            SyntheticSpec(n_independent=3)

    def test_non_stationary_rejected(self):
        with pytest.raises(InvalidInputError):
            SyntheticSpec(
                n_independent=1, ar_coefficients=(1.0,), noise_std=(1.0,), cross_coefficients=(0.1,)
            )


class TestSyntheticMarketSeries:
    def test_roster_layout(self):
        roster = synthetic_market_series(SyntheticSpec(seed=1), history=3, window=100)
        assert [s.agent_id for s in roster] == ["P1", "P2", "P3", "P4", "P5"]
        assert all(s.values.shape == (103,) for s in roster)
        assert all(s.start_time == 3 for s in roster)

    def test_reproducible(self):
        a = synthetic_market_series(SyntheticSpec(seed=8), history=2, window=50)
        b = synthetic_market_series(SyntheticSpec(seed=8), history=2, window=50)
        for left, right in zip(a, b):
            assert np.array_equal(left.values, right.values)
        c = synthetic_market_series(SyntheticSpec(seed=9), history=2, window=50)
        assert not np.array_equal(a[0].values, c[0].values)

    def test_replacing_start_time_keeps_values(self):
        roster = synthetic_market_series(SyntheticSpec(seed=8), history=4, window=30)
        rewrapped = dataclasses.replace(roster[0], start_time=6)
        assert np.array_equal(rewrapped.values, roster[0].values)
