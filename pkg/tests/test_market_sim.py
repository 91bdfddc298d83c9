import math

import numpy as np
import pandas as pd
import pytest

from infovault import equilibrium, market_sim
from infovault.data_model import Gaussian, MarketParams, Regime
from infovault.exceptions import DomainError, StructuralError
from infovault.market_sim import AgentPopulation, clear_market
from tests.conftest import random_market_params


def test_demand_uninformed_examples():
    belief = Gaussian(mean=12, variance=1)
    assert market_sim.demand_uninformed(12, belief, 2) == 0
    assert market_sim.demand_uninformed(10, belief, 2) == pytest.approx(1.0)
    assert market_sim.demand_uninformed(10, belief, 4) == pytest.approx(0.5)


def test_demand_uninformed_rejects_degenerate_belief():
    with pytest.raises(DomainError):
        market_sim.demand_uninformed(10, Gaussian(mean=12, variance=0), 2)


def test_demand_informed_examples():
    assert market_sim.demand_informed(11, 11, 0.5, 1) == 0
    assert market_sim.demand_informed(10, 11, 0.5, 1) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        market_sim.demand_informed(10, 11, 0.0, 1)


def test_naive_informed_with_useless_signal_trades_like_uninformed():
    prior = Gaussian(mean=10, variance=1.5)
    informed = market_sim.demand_informed(9.0, 30.0, 1.0, 2.0, prior=prior, signal_variance=math.inf)
    assert informed == pytest.approx(market_sim.demand_uninformed(9.0, prior, 2.0))


def test_only_uninformed_clear_at_prior_mean():
    params = MarketParams(n_informed=0, m_uninformed=25, realized_signal=14.0)
    population = AgentPopulation.from_params(params, Regime.NAIVE)
    result = clear_market(population, 0.0)
    assert result.price == pytest.approx(params.prior.mean, abs=1e-12)
    assert abs(result.excess_demand_at_price) <= 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_naive_clearing_matches_equilibrium(seed):
    params = random_market_params(np.random.default_rng(seed))
    population = AgentPopulation.from_params(params, Regime.NAIVE)
    result = clear_market(population, params.realized_noise)
    assert result.price == pytest.approx(equilibrium.naive_equilibrium(params).price, abs=1e-10)
    lo, hi = result.bracket
    assert lo < result.price < hi


@pytest.mark.parametrize("seed", range(20))
def test_fully_revealing_clearing_matches_equilibrium(seed):
    params = random_market_params(np.random.default_rng(seed))
    population = AgentPopulation.from_params(params, Regime.FULLY_REVEALING)
    result = clear_market(population, params.realized_noise)
    assert result.price == pytest.approx(equilibrium.fully_revealing_price(params).price, abs=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_ree_clearing_reproduces_the_conjectured_rule(seed):
    params = random_market_params(np.random.default_rng(seed))
    solution = equilibrium.solve_ree_fixed_point(params)
    population = AgentPopulation.from_params(params, Regime.REE, solution)
    result = clear_market(population, params.realized_noise)
    assert result.price == pytest.approx(solution.price, abs=1e-8)


def test_clearing_rejects_nondecreasing_demand():
    population = AgentPopulation(
        n_informed=0,
        m_uninformed=10,
        z_noise=1,
        risk_aversion=2,
        belief_uninformed=Gaussian(mean=0, variance=1),
        belief_informed=Gaussian(mean=0, variance=1),
        regime=Regime.REE,
        realized_signal=0,
        price_slope=1.5,
    )
    with pytest.raises(StructuralError) as e:
        clear_market(population, 0.3)
    assert e.value.slope > 0


def test_population_needs_traders():
    with pytest.raises(ValueError):
        AgentPopulation(
            n_informed=0,
            m_uninformed=0,
            z_noise=1,
            risk_aversion=2,
            belief_uninformed=Gaussian(mean=0, variance=1),
            belief_informed=Gaussian(mean=0, variance=1),
            regime=Regime.NAIVE,
            realized_signal=0,
        )


@pytest.mark.parametrize("regime", list(Regime))
def test_clearing_is_scale_free_in_masses(regime):
    params = MarketParams(n_informed=4, m_uninformed=9, z_noise=0.7, realized_signal=11, realized_noise=0.8)
    scaled = params.model_copy(update={"n_informed": 28.0, "m_uninformed": 63.0, "z_noise": 4.9})
    price = clear_market(AgentPopulation.from_params(params, regime), params.realized_noise).price
    scaled_price = clear_market(AgentPopulation.from_params(scaled, regime), scaled.realized_noise).price
    assert scaled_price == pytest.approx(price, rel=1e-9)


def test_no_noise_mass_ignores_noise_draw():
    params = MarketParams(z_noise=0.0, realized_signal=11.0)
    population = AgentPopulation.from_params(params, Regime.NAIVE)
    assert clear_market(population, -3.0).price == clear_market(population, 5.0).price


def test_single_replication_reproduces_the_equilibrium_price(params):
    study = market_sim.run_convergence_study(params, [(10, 10)], 1, seed=5)
    signal, noise = market_sim.draw_shocks(params, Regime.NAIVE, 1, seed=5)
    drawn = params.model_copy(update={"realized_signal": signal[0], "realized_noise": noise[0]})

    assert study.price.iloc[0] == pytest.approx(equilibrium.naive_equilibrium(drawn).price, abs=1e-10)
    assert study.var_p.iloc[0] == 0
    assert math.isnan(study.ie.iloc[0])


def test_study_is_deterministic_and_order_free(params):
    grid = [(10, 10), (10, 1_000), (100, 10)]
    first = market_sim.run_convergence_study(params, grid, 200, seed=11)
    again = market_sim.run_convergence_study(params, grid, 200, seed=11)
    pd.testing.assert_frame_equal(first, again)

    reversed_grid = market_sim.run_convergence_study(params, grid[::-1], 200, seed=11)
    pd.testing.assert_frame_equal(first, reversed_grid.iloc[::-1].reset_index(drop=True))

    other = market_sim.run_convergence_study(params, grid, 200, seed=12)
    assert not np.allclose(first.price, other.price)


def test_replication_streams_do_not_depend_on_count(params):
    short, _ = market_sim.draw_shocks(params, Regime.NAIVE, 5, seed=1)
    long, _ = market_sim.draw_shocks(params, Regime.NAIVE, 50, seed=1)
    np.testing.assert_array_equal(short, long[:5])


def test_fully_revealing_volatility_falls_with_traders(params):
    grid = [(5, 5), (50, 50), (500, 500)]
    study = market_sim.run_convergence_study(params, grid, 2_000, seed=3, regime=Regime.FULLY_REVEALING)
    assert np.all(np.diff(study.var_p) < 0)
    assert np.all(np.diff(study.ie) > 0)
    np.testing.assert_allclose(study.var_p, study.analytic_var_p, rtol=0.2)


@pytest.mark.parametrize(
    "replications, grid",
    [(0, [(10, 10)]), (10, []), (10, [(0, 0)])],
)
def test_study_rejects_bad_inputs(params, replications, grid):
    with pytest.raises(DomainError):
        market_sim.run_convergence_study(params, grid, replications, seed=1)


def test_uninformed_sweep_mean_converges_to_prior(params):
    grid = [(10, 10.0**k) for k in range(1, 8)]
    study = market_sim.run_convergence_study(params, grid, 1_000, seed=20230601)
    last = study.iloc[-1]
    assert abs(last.price - params.prior.mean) < 1e-4
    assert np.all(np.diff(study.var_p) < 0)


@pytest.mark.slow
@pytest.mark.parametrize("regime", list(Regime))
def test_sample_moments_match_analytic_moments(params, regime):
    study = market_sim.run_convergence_study(
        params.model_copy(update={"realized_noise": 0.0}),
        [(10, 10), (50, 20)],
        20_000,
        seed=99,
        regime=regime,
    )
    for row in study.itertuples():
        assert abs(row.price_gap) < 4 * row.price_se
        assert row.var_p == pytest.approx(row.analytic_var_p, rel=0.05)


@pytest.mark.slow
def test_largest_uninformed_cell_within_three_standard_errors(params):
    misses = 0
    for seed in range(20):
        study = market_sim.run_convergence_study(params, [(10, 1e7)], 10_000, seed=seed)
        row = study.iloc[-1]
        if abs(row.price - params.prior.mean) > 3 * row.price_se:
            misses += 1
    # at least 19 of 20 runs inside the band
    assert misses <= 1
