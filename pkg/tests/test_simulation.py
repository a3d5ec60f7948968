"""
Tests for the simulation design, dataset generation and the Monte Carlo driver.
"""
import dataclasses
import math
from multiprocessing import get_context

import numpy as np
import pytest

from config import get_config
from errors import ContractViolation, DomainError
from services.criteria import CriterionId
from services.selection import Classification
from services.simulation import (
    TABLE_PRESETS,
    CriterionCounts,
    IdentificationTable,
    SimulationConfig,
    equicorrelation,
    gen_dataset,
    marginal_variance,
    monte_carlo,
    preset_config,
    risk_curve,
    simulate_run,
    solve_intercept,
)

SLOPES_8 = (0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.0, 0.0)


class TestMarginalVariance:
    def test_table_design(self):
        assert marginal_variance(SLOPES_8, equicorrelation(8, 0.3), 1.0) == pytest.approx(1.51, abs=1e-12)

    def test_zero_slopes(self):
        assert marginal_variance(np.zeros(8), equicorrelation(8, 0.3), 2.5) == 2.5

    def test_independent_covariates(self):
        assert marginal_variance(SLOPES_8, np.eye(8), 1.0) == pytest.approx(1.30)

    def test_empty_beta(self):
        assert marginal_variance([], np.empty((0, 0)), 0.7) == 0.7

    def test_not_positive_definite(self):
        with pytest.raises(DomainError):
            marginal_variance([1.0, 1.0], [[1.0, 2.0], [2.0, 1.0]], 1.0)


class TestSolveIntercept:
    @pytest.mark.parametrize("rate, expected", [
        (0.75, -0.8288),
        (0.70, -0.6444),
        (0.60, -0.3113),
    ])
    def test_published_rates(self, rate, expected):
        beta0 = solve_intercept(rate, SLOPES_8, equicorrelation(8, 0.3), 1.0)
        assert beta0 == pytest.approx(expected, abs=1e-4)

    def test_half_censoring_is_zero(self):
        assert solve_intercept(0.5, SLOPES_8, equicorrelation(8, 0.3), 1.0) == 0.0

    def test_rate_bounds(self):
        with pytest.raises(ContractViolation):
            solve_intercept(1.0, SLOPES_8, equicorrelation(8, 0.3), 1.0)

    @pytest.mark.parametrize("table", sorted(TABLE_PRESETS))
    def test_presets_close_to_their_rates(self, table):
        preset = TABLE_PRESETS[table]
        config = preset_config(table, 100)
        assert config.beta_true[0] == preset.beta0
        assert config.censoring_rate == pytest.approx(preset.censoring_rate, abs=0.01)


class TestSimulationConfig:
    def test_derived_dimensions(self):
        config = preset_config(1, 100)
        assert config.p == 8
        assert config.d0 == 4
        assert config.scan_max_k == 10

    def test_build_from_target_censoring(self):
        config = SimulationConfig.build(100, target_censoring=0.6)
        assert config.censoring_rate == pytest.approx(0.6, abs=1e-12)

    def test_build_needs_one_intercept_source(self):
        with pytest.raises(ContractViolation):
            SimulationConfig.build(100)
        with pytest.raises(ContractViolation):
            SimulationConfig.build(100, beta0=0.0, target_censoring=0.5)

    def test_validation(self):
        with pytest.raises(ContractViolation):
            SimulationConfig(n=1, beta_true=(0.0,))
        with pytest.raises(DomainError):
            SimulationConfig(n=10, beta_true=(0.0, 1.0), sigma2=0.0)
        with pytest.raises(DomainError):
            SimulationConfig(n=10, beta_true=(0.0, 1.0, 1.0, 1.0), rho=-0.6)
        with pytest.raises(ContractViolation):
            SimulationConfig(n=10, beta_true=(0.0, 1.0), max_k=4)

    def test_criteria_parsed(self):
        config = SimulationConfig(n=10, beta_true=(0.0, 1.0), criteria=("bic", "eic2:npp"))
        assert [c.label for c in config.criteria] == ["BIC", "EIC2_npp"]

    def test_bootstrap_seed_differs_per_run(self):
        config = preset_config(1, 100)
        assert config.bootstrap_spec(0).base_seed != config.bootstrap_spec(1).base_seed
        assert config.bootstrap_spec(3) == config.bootstrap_spec(3)


class TestGenDataset:
    def test_shape_and_names(self):
        data = gen_dataset(preset_config(1, 120, seed=1), 0)
        assert data.n == 120
        assert data.q == 9
        assert data.intercept_column == 0
        assert data.column_names[:3] == ("const", "x1", "x2")
        np.testing.assert_array_equal(data.design[:, 0], 1.0)

    def test_deterministic_per_run(self):
        config = preset_config(2, 50, seed=8)
        a, b, c = gen_dataset(config, 4), gen_dataset(config, 4), gen_dataset(config, 5)
        np.testing.assert_array_equal(a.responses, b.responses)
        assert not np.array_equal(a.responses, c.responses)

    def test_covariates_do_not_depend_on_beta(self):
        first = gen_dataset(preset_config(1, 60, seed=9), 0)
        second = gen_dataset(preset_config(4, 60, seed=9), 0)
        np.testing.assert_array_equal(first.design, second.design)

    def test_large_sample_moments(self):
        config = preset_config(1, 50000, seed=21)
        data = gen_dataset(config, 0)
        assert data.censoring_rate == pytest.approx(config.censoring_rate, abs=0.01)
        sample_cov = np.cov(data.design[:, 1:], rowvar=False)
        np.testing.assert_allclose(sample_cov, config.covariance, atol=0.03)


class TestCounts:
    def test_add_and_risk(self):
        counts = CriterionCounts().add(Classification.CORRECT).add(Classification.OVER)
        assert (counts.under, counts.correct, counts.over) == (0, 1, 1)
        assert counts.total == 2
        assert counts.risk == 0.5
        assert math.isnan(CriterionCounts().risk)


def small_config(**kwargs):
    defaults = dict(runs=3, replicates=2, criteria=("aic", "bic"), seed=11)
    defaults.update(kwargs)
    return preset_config(1, 100, **defaults)


class TestMonteCarlo:
    def test_single_run(self):
        outcome = simulate_run(small_config(), 0)
        assert not outcome.failed
        assert set(outcome.classifications) == {"AIC", "BIC"}

    def test_rows_sum_to_completed_runs(self):
        table = monte_carlo(small_config())
        for label in ("AIC", "BIC"):
            assert table.counts[label].total == table.runs
        assert table.runs + table.failed_runs == 3
        assert table.d0 == 4
        assert 0.0 < table.mean_censoring < 1.0

    def test_single_replication(self):
        table = monte_carlo(small_config(runs=1))
        assert table.counts["BIC"].total + table.failed_runs == 1

    def test_bootstrap_criteria_run(self):
        table = monte_carlo(small_config(runs=1, criteria=("eic1:pb", "bcv", "qcv632")))
        assert set(table.counts) == {"EIC1_pb", "BCV", "QCV632"}

    def test_deterministic(self):
        config = small_config(criteria=("bic", "eic3:np"))
        assert monte_carlo(config).counts == monte_carlo(config).counts

    def test_worker_count_does_not_change_results(self):
        get_config().optimizer.tol = 1e-6
        config = small_config(runs=4, criteria=("aic", "bcv"))
        serial = monte_carlo(config)
        parallel = monte_carlo(dataclasses.replace(config, workers=2), mp_context=get_context("spawn"))
        assert serial.counts == parallel.counts
        assert serial.failed_runs == parallel.failed_runs
        assert serial.skipped_families == parallel.skipped_families

    def test_spawned_workers_see_current_settings(self):
        get_config().optimizer.max_iter = 0
        config = small_config(runs=2, criteria=("bic",))
        serial = monte_carlo(config)
        parallel = monte_carlo(dataclasses.replace(config, workers=2), mp_context=get_context("spawn"))
        assert serial.failed_runs == 2
        assert parallel.failed_runs == serial.failed_runs
        assert parallel.counts == serial.counts


class TestRiskCurve:
    def table(self, n, correct):
        counts = {
            "AIC": CriterionCounts(0, correct, 10 - correct),
            "BIC": CriterionCounts(0, 10, 0),
            "BCV": CriterionCounts(5, 5, 0),
        }
        return IdentificationTable(n=n, d0=4, runs=10, counts=counts)

    def test_series_order_and_values(self):
        curve = risk_curve([self.table(100, 3), self.table(200, 4)])
        assert list(curve) == ["BIC", "BCV", "AIC"]
        assert curve["AIC"] == [(100, 0.3), (200, 0.4)]
        assert curve["BIC"] == [(100, 1.0), (200, 1.0)]

    def test_mismatched_criteria(self):
        other = IdentificationTable(n=150, d0=4, runs=1, counts={"AIC": CriterionCounts(0, 1, 0)})
        with pytest.raises(ContractViolation):
            risk_curve([self.table(100, 3), other])

    def test_empty(self):
        assert risk_curve([]) == {}


@pytest.mark.slow
def test_bic_identification_improves_with_n():
    risks = []
    for n in (100, 400):
        config = preset_config(1, n, runs=40, replicates=2, criteria=(CriterionId.parse("bic"),), seed=3)
        risks.append(monte_carlo(config).risk("BIC"))
    assert risks[1] >= risks[0]


@pytest.mark.slow
def test_bic_identifies_at_half_censoring():
    config = preset_config(4, 200, runs=100, replicates=2, criteria=("bic",), seed=20190604)
    assert monte_carlo(config).risk("BIC") >= 0.85


@pytest.mark.slow
def test_heavy_censoring_orderings():
    config = preset_config(1, 100, runs=100, replicates=50, seed=20190601, workers=8)
    table = monte_carlo(config)
    counts = table.counts
    majority = table.runs / 2
    assert table.failed_runs == 0
    assert counts["CV632"].correct > counts["BIC"].correct
    assert counts["CV632"].correct > counts["BCV"].correct
    assert counts["BQCV"].over > majority
    assert counts["QCV632"].over > majority
    assert counts["EIC4_pb"].under > majority
    assert counts["EIC5_pb"].under > majority
