"""Agent demand functions, market clearing and Monte Carlo convergence studies."""

import logging
import math
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import optimize
from tqdm import tqdm

from infovault import equilibrium
from infovault.data_model import EquilibriumSolution, Gaussian, MarketParams, Regime
from infovault.exceptions import DomainError, StructuralError
from infovault.stats_core import posterior, posterior_weight

STUDY_COLUMNS = [
    "n",
    "m",
    "regime",
    "price",
    "theta1",
    "theta2",
    "var_p",
    "ie",
    "analytic_price",
    "analytic_var_p",
    "analytic_ie",
    "price_gap",
    "price_se",
]


class AgentPopulation(BaseModel):
    """Masses, risk aversion and beliefs of the trader groups in one market.

    Beliefs are affine in the signal and, for price-conditioning uninformed traders,
    in the price:
        informed mean   = informed_intercept + informed_signal_weight * X
        uninformed mean = uninformed_intercept + uninformed_signal_weight * X + price_slope * p
    """

    model_config = ConfigDict(frozen=True)

    n_informed: float
    m_uninformed: float
    z_noise: float
    risk_aversion: float
    belief_uninformed: Gaussian
    belief_informed: Gaussian
    regime: Regime
    realized_signal: float
    informed_intercept: float = 0.0
    informed_signal_weight: float = 1.0
    uninformed_intercept: float = 0.0
    uninformed_signal_weight: float = 0.0
    price_slope: float = 0.0
    # +1: noise traders demand Z h; -1: they supply it (fully revealing price rule)
    noise_sign: float = 1.0

    @model_validator(mode="after")
    def must_be_tradeable(self):
        if self.n_informed + self.m_uninformed <= 0:
            raise ValueError("population needs at least one informed or uninformed trader")
        if self.risk_aversion <= 0:
            raise ValueError("risk_aversion must be > 0")
        return self

    @classmethod
    def from_params(
        cls,
        params: MarketParams,
        regime: Regime,
        solution: EquilibriumSolution | None = None,
    ) -> "AgentPopulation":
        """Population whose beliefs follow the given regime.

        For the REE regime the conjectured price rule comes from `solution`
        (solved here when not given).
        """

        common = dict(
            n_informed=params.n_informed,
            m_uninformed=params.m_uninformed,
            z_noise=params.z_noise,
            risk_aversion=params.risk_aversion,
            regime=regime,
            realized_signal=params.realized_signal,
        )

        if regime == Regime.NAIVE:
            mu_1 = posterior_weight(params.prior, params.signal_variance)
            return cls(
                belief_uninformed=params.prior,
                belief_informed=posterior(
                    params.prior, params.signal_variance, params.realized_signal
                ),
                informed_intercept=mu_1 * params.prior.mean,
                informed_signal_weight=1.0 - mu_1,
                uninformed_intercept=params.prior.mean,
                **common,
            )

        if regime == Regime.REE:
            if solution is None:
                solution = equilibrium.solve_ree_fixed_point(params)
            theta = equilibrium.ree_theta(solution.coeff_informed, solution.coeff_noise, params)
            variance = equilibrium.ree_conditional_variance(
                solution.coeff_informed, solution.coeff_noise, params
            )
            return cls(
                belief_uninformed=Gaussian(mean=theta * solution.price, variance=variance),
                belief_informed=Gaussian(
                    mean=params.realized_signal, variance=params.epsilon_variance
                ),
                price_slope=theta,
                **common,
            )

        # the price reveals the signal: everybody holds the informed belief
        revealed = equilibrium.fully_revealing_price(params).conditional_variance
        belief = Gaussian(mean=params.realized_signal, variance=revealed)
        return cls(
            belief_uninformed=belief,
            belief_informed=belief,
            uninformed_signal_weight=1.0,
            noise_sign=-1.0,
            **common,
        )

    def uninformed_belief_at(self, price: float, signal: float | None = None) -> Gaussian:
        """Uninformed belief after observing the price (and the signal when it is revealed)."""

        signal = self.realized_signal if signal is None else signal
        mean = (
            self.uninformed_intercept
            + self.uninformed_signal_weight * signal
            + self.price_slope * price
        )
        return Gaussian(mean=mean, variance=self.belief_uninformed.variance)


class ClearingResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    price: float
    excess_demand_at_price: float
    iterations: int
    bracket: tuple[float, float]


def demand_uninformed(price: float, belief: Gaussian, risk_aversion: float) -> float:
    """Mean-variance demand (E - p) / (alpha Var) of a trader holding `belief`."""

    if belief.variance <= 0:
        raise DomainError("demand is undefined for a zero-variance belief")
    if risk_aversion <= 0:
        raise DomainError(f"risk aversion must be > 0, got {risk_aversion}")
    return (belief.mean - price) / (risk_aversion * belief.variance)


def demand_informed(
    price: float,
    signal: float,
    epsilon_variance: float,
    risk_aversion: float,
    prior: Gaussian | None = None,
    signal_variance: float | None = None,
) -> float:
    """Demand of an informed trader.

    With a signal that is a sufficient statistic the demand is (X - p) / (alpha sigma_eps^2).
    Passing `prior` and `signal_variance` switches to the naive model, where the trader
    holds the Bayesian posterior of S given X.
    """

    if risk_aversion <= 0:
        raise DomainError(f"risk aversion must be > 0, got {risk_aversion}")

    if prior is not None:
        if signal_variance is None:
            raise DomainError("naive informed demand needs the signal variance")
        belief = posterior(prior, signal_variance, signal)
        return demand_uninformed(price, belief, risk_aversion)

    if epsilon_variance <= 0:
        raise DomainError("demand is undefined for a zero residual variance")
    return (signal - price) / (risk_aversion * epsilon_variance)


def demand_line(population: AgentPopulation, signal, noise):
    """Aggregate excess demand as intercept - slope * p.

    Works elementwise on numpy arrays of signals and noise draws.
    """

    alpha = population.risk_aversion
    w_informed = population.n_informed / (alpha * population.belief_informed.variance)
    w_uninformed = population.m_uninformed / (alpha * population.belief_uninformed.variance)

    informed_mean = population.informed_intercept + population.informed_signal_weight * signal
    uninformed_mean = (
        population.uninformed_intercept + population.uninformed_signal_weight * signal
    )

    intercept = (
        w_informed * informed_mean
        + w_uninformed * uninformed_mean
        + population.noise_sign * population.z_noise * noise
    )
    slope = w_informed + w_uninformed * (1.0 - population.price_slope)
    return intercept, slope


def aggregate_demand(
    population: AgentPopulation, price: float, signal: float, noise: float
) -> float:
    """N Y_I + M Y + s Z h evaluated agent group by agent group, with s = population.noise_sign.

    s is +1 except in the fully revealing regime, where the noise enters with s = -1.
    """

    total = population.noise_sign * population.z_noise * noise
    if population.n_informed > 0:
        informed = Gaussian(
            mean=population.informed_intercept + population.informed_signal_weight * signal,
            variance=population.belief_informed.variance,
        )
        total += population.n_informed * demand_uninformed(price, informed, population.risk_aversion)
    if population.m_uninformed > 0:
        uninformed = population.uninformed_belief_at(price, signal)
        total += population.m_uninformed * demand_uninformed(
            price, uninformed, population.risk_aversion
        )
    return total


def clear_market(
    population: AgentPopulation,
    realized_noise: float,
    tol: float = 1e-12,
    signal: float | None = None,
    verify: bool = True,
) -> ClearingResult:
    """Price at which aggregate excess demand is zero.

    The closed form of the affine clearing condition is the answer; the bisection on a
    bracket around it is the verification path.
    """

    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    signal = population.realized_signal if signal is None else signal

    intercept, slope = demand_line(population, signal, realized_noise)
    if not slope > 0:
        # excess demand is intercept - slope * p, so its slope in p is -slope
        raise StructuralError(-slope)

    price = intercept / slope
    width = max(1.0, abs(price))
    bracket = (price - width, price + width)
    iterations = 0

    if verify:

        def excess(p):
            return aggregate_demand(population, p, signal, realized_noise)

        root, info = optimize.bisect(
            excess, bracket[0], bracket[1], xtol=tol, full_output=True
        )
        iterations = info.iterations
        if abs(root - price) > max(10 * tol, 1e-9 * width):
            logging.warning(f"bisection root {root!r} disagrees with closed form {price!r}")

    return ClearingResult(
        price=price,
        excess_demand_at_price=aggregate_demand(population, price, signal, realized_noise),
        iterations=iterations,
        bracket=bracket,
    )


#################################### Monte Carlo ##########################################


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Random stream of one replication: the replication index is the spawn key of the root seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def draw_shocks(base: MarketParams, regime: Regime, replications: int, seed: int):
    """Signal and noise draws for every replication.

    Naive: S ~ N(S, sigma_S^2), X = S + N(0, sigma_X^2). REE: X ~ N(X, sigma_X^2).
    Fully revealing: the signal is revealed at its realized value. Noise h ~ N(0, sigma_h^2).
    """

    z = np.array([replication_rng(seed, r).standard_normal(3) for r in range(replications)])
    noise = math.sqrt(base.noise_variance) * z[:, 2]

    if regime == Regime.NAIVE:
        fundamental = base.prior.mean + base.prior.std * z[:, 0]
        signal = fundamental + math.sqrt(base.signal_variance) * z[:, 1]
    elif regime == Regime.REE:
        signal = base.realized_signal + math.sqrt(base.signal_variance) * z[:, 1]
    else:
        signal = np.full(replications, base.realized_signal)
    return signal, noise


def _analytic_moments(
    params: MarketParams, regime: Regime, solution: EquilibriumSolution
) -> tuple[float, float]:
    if regime == Regime.NAIVE:
        return params.prior.mean, equilibrium.price_variance(params, solution)
    if regime == Regime.REE:
        mean = solution.coeff_informed * params.realized_signal
        return mean, equilibrium.price_variance(params, solution)
    return params.realized_signal, solution.coeff_noise**2 * params.noise_variance


def run_convergence_study(
    base: MarketParams,
    grid: Sequence[tuple[float, float]],
    replications: int,
    seed: int,
    regime: Regime = Regime.NAIVE,
    progress: bool = False,
) -> pd.DataFrame:
    """Sample moments of the clearing price over a grid of (N, M) against their analytic values.

    The same replication streams are reused in every grid cell, so the table is a
    deterministic function of the seed and does not depend on evaluation order.
    """

    if replications < 1:
        raise DomainError(f"replications must be >= 1, got {replications}")
    if len(grid) == 0:
        raise DomainError("grid must not be empty")

    signal, noise = draw_shocks(base, regime, replications, seed)

    rows = []
    for n, m in tqdm(grid, disable=not progress):
        if n + m <= 0:
            raise DomainError(f"grid cell (N={n}, M={m}) has no traders")
        params = base.with_sizes(n, m)
        solution = equilibrium.solve(params, regime)
        population = AgentPopulation.from_params(params, regime, solution)

        intercept, slope = demand_line(population, signal, noise)
        if not slope > 0:
            raise StructuralError(-slope)
        prices = intercept / slope

        mean = float(np.mean(prices))
        var = float(np.var(prices, ddof=1)) if replications > 1 else 0.0
        analytic_mean, analytic_var = _analytic_moments(params, regime, solution)

        rows.append(
            {
                "n": float(n),
                "m": float(m),
                "regime": regime.value,
                "price": mean,
                "theta1": solution.coeff_informed,
                "theta2": solution.coeff_noise,
                "var_p": var,
                "ie": 1.0 / var if var > 0 else math.nan,
                "analytic_price": analytic_mean,
                "analytic_var_p": analytic_var,
                "analytic_ie": 1.0 / analytic_var if analytic_var > 0 else math.nan,
                "price_gap": mean - analytic_mean,
                "price_se": math.sqrt(var / replications),
            }
        )
        logging.debug(f"cell N={n} M={m}: mean price {mean:.6g}, var {var:.6g}")

    return pd.DataFrame(rows, columns=STUDY_COLUMNS)
