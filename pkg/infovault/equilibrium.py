"""Equilibrium prices for the naive, rational expectations and fully revealing regimes."""

import logging
import math
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy import optimize

from infovault.data_model import (
    EquilibriumSolution,
    Gaussian,
    Group,
    MarketParams,
    PriceVariance,
    Regime,
)
from infovault.exceptions import ConvergenceError, DomainError
from infovault.stats_core import posterior, posterior_weight

# Canonical starting point of the damped iteration
INITIAL_GAMMA = (0.5, 0.0)
DAMPING = 0.5
# Iterations without improving the best residual before switching to the fallback
STAGNATION_PATIENCE = 200
# Price variance below this is the no-trade limit gamma -> 0, not an equilibrium
DEGENERATE_PRICE_VARIANCE = 1e-12


########################################### Naive ###########################################


def informed_belief(params: MarketParams) -> Gaussian:
    """Informed posterior E(S|X), Var(S|X) under the naive model."""
    return posterior(params.prior, params.signal_variance, params.realized_signal)


def naive_coefficients(params: MarketParams) -> tuple[float, float]:
    """theta_1 (weight on E(S|X)) and theta_2 (coefficient on Z*h) of the naive price."""

    var_s = params.prior.variance
    var_sx = informed_belief(params).variance
    n, m = params.n_informed, params.m_uninformed

    if params.variants.swapped_naive_denominator:
        denominator = n * var_sx + m * var_s
    else:
        denominator = n * var_s + m * var_sx

    if not denominator > 0:
        raise DomainError(f"naive equilibrium denominator is {denominator}")

    theta1 = n * var_s / denominator
    theta2 = params.risk_aversion * var_sx * var_s / denominator
    return theta1, theta2


def naive_equilibrium(params: MarketParams) -> EquilibriumSolution:
    """Market clearing price when nobody learns from the price.

    p = theta_1 E(S|X) + (1 - theta_1) E(S) + theta_2 Z h
    """

    belief = informed_belief(params)
    theta1, theta2 = naive_coefficients(params)
    price = (
        theta1 * belief.mean
        + (1.0 - theta1) * params.prior.mean
        + theta2 * params.z_noise * params.realized_noise
    )
    return EquilibriumSolution(
        price=price,
        coeff_informed=theta1,
        coeff_noise=theta2,
        conditional_mean=belief.mean,
        conditional_variance=belief.variance,
        regime=Regime.NAIVE,
    )


################################# Rational expectations #####################################


def _price_variance(gamma1: float, gamma2: float, params: MarketParams) -> float:
    return gamma1**2 * params.signal_variance + gamma2**2 * params.noise_variance


def ree_theta(gamma1: float, gamma2: float, params: MarketParams) -> float:
    """Slope theta of E(S|p) = theta * p under the conjectured rule p = gamma1 X + gamma2 h."""

    var_p = _price_variance(gamma1, gamma2, params)
    if var_p <= 0:
        raise DomainError(f"price variance is {var_p} for gamma=({gamma1}, {gamma2})")
    return gamma1 * params.signal_variance / var_p


def ree_conditional_variance(gamma1: float, gamma2: float, params: MarketParams) -> float:
    """Var(S|p) = Var(S) - Cov(S,p)^2 / Var(p)."""

    var_p = _price_variance(gamma1, gamma2, params)
    if var_p <= 0:
        raise DomainError(f"price variance is {var_p} for gamma=({gamma1}, {gamma2})")

    if params.variants.noise_variance_in_price_belief:
        var_s = params.signal_variance + params.noise_variance
    else:
        var_s = params.signal_variance + params.epsilon_variance
    return var_s - gamma1**2 * params.signal_variance**2 / var_p


def ree_coefficients(
    gamma1: float, gamma2: float, params: MarketParams
) -> tuple[float, float]:
    """Coefficients (delta_1, delta_2) of the price implied by a conjectured (gamma1, gamma2)."""

    theta = ree_theta(gamma1, gamma2, params)
    var_sp = ree_conditional_variance(gamma1, gamma2, params)
    n, m = params.n_informed, params.m_uninformed
    eps = params.epsilon_variance

    denominator = n * var_sp + (1.0 - theta) * m * eps
    if denominator == 0 or not math.isfinite(denominator):
        raise DomainError(f"REE denominator is {denominator} for gamma=({gamma1}, {gamma2})")

    delta1 = n * var_sp / denominator
    delta2 = params.risk_aversion * var_sp * eps * params.z_noise / denominator
    return delta1, delta2


def _residual(gamma: np.ndarray, params: MarketParams, restrict_gamma2: bool) -> float:
    delta1, delta2 = ree_coefficients(gamma[0], gamma[1], params)
    if restrict_gamma2:
        return abs(delta1 - gamma[0])
    return max(abs(delta1 - gamma[0]), abs(delta2 - gamma[1]))


def _is_degenerate(gamma: np.ndarray, params: MarketParams) -> bool:
    return _price_variance(gamma[0], gamma[1], params) < DEGENERATE_PRICE_VARIANCE


def _damped_iteration(
    gamma: np.ndarray,
    params: MarketParams,
    tol: float,
    max_iter: int,
    restrict_gamma2: bool,
) -> tuple[np.ndarray, float, int]:
    """Iterate gamma <- (1 - damping) gamma + damping delta(gamma).

    Returns the best point seen, its residual and the iterations used. Stops early
    on domain errors, on the degenerate no-trade limit and on stagnation.
    """

    best_gamma, best_residual = gamma.copy(), math.inf
    since_improved = 0

    for it in range(1, max_iter + 1):
        if _is_degenerate(gamma, params):
            logging.debug(f"iteration {it}: gamma={gamma} collapsed to the no-trade limit")
            break
        try:
            delta = np.array(ree_coefficients(gamma[0], gamma[1], params))
        except DomainError as e:
            logging.debug(f"iteration {it}: {e}")
            break

        if restrict_gamma2:
            delta[1] = 0.0
        residual = float(np.max(np.abs(delta - gamma)))

        if residual < best_residual:
            best_gamma, best_residual = gamma.copy(), residual
            since_improved = 0
        else:
            since_improved += 1

        if residual <= tol:
            return gamma, residual, it
        if since_improved >= STAGNATION_PATIENCE:
            logging.debug(f"iteration {it}: stagnated at residual {best_residual:.3e}")
            break

        gamma = (1.0 - DAMPING) * gamma + DAMPING * delta
        if not np.all(np.isfinite(gamma)):
            break

    return best_gamma, best_residual, it


def _derivative_free_search(
    start: np.ndarray, params: MarketParams, tol: float, max_iter: int, restrict_gamma2: bool
) -> np.ndarray:
    """Nelder-Mead on the squared residual, polished by the derivative-free df-sane root search."""

    def objective(x):
        gamma = np.array([x[0], 0.0 if restrict_gamma2 else x[1]])
        if _is_degenerate(gamma, params):
            return math.inf
        return _safe_residual(gamma, params, restrict_gamma2) ** 2

    simplex = optimize.minimize(
        objective,
        start,
        method="Nelder-Mead",
        options={"xatol": tol * 1e-2, "fatol": tol**2 * 1e-2, "maxiter": max_iter, "maxfev": 4 * max_iter},
    )
    logging.debug(f"Nelder-Mead: {simplex.message} residual^2={simplex.fun:.3e}")

    polished = optimize.root(
        _fixed_point_system(params, restrict_gamma2),
        simplex.x[:1] if restrict_gamma2 else simplex.x,
        method="df-sane",
        options={"fatol": tol * 1e-2, "ftol": 0.0, "maxfev": max_iter},
    )
    if not np.all(np.isfinite(polished.x)):
        return np.array([simplex.x[0], 0.0 if restrict_gamma2 else simplex.x[1]])
    if restrict_gamma2:
        return np.array([polished.x[0], 0.0])
    return np.asarray(polished.x, dtype=float)


def _fixed_point_system(params: MarketParams, restrict_gamma2: bool):
    """delta(gamma) - gamma as a function of the free coordinates."""

    def system(x):
        gamma = np.array([x[0], 0.0 if restrict_gamma2 else x[1]])
        try:
            delta = np.array(ree_coefficients(gamma[0], gamma[1], params))
        except DomainError:
            return np.full(len(x), 1e6)
        out = delta - gamma
        return out[:1] if restrict_gamma2 else out

    return system


def _safe_residual(gamma: np.ndarray, params: MarketParams, restrict_gamma2: bool) -> float:
    if not np.all(np.isfinite(gamma)):
        return math.inf
    try:
        return _residual(gamma, params, restrict_gamma2)
    except DomainError:
        return math.inf


def _ray_start(params: MarketParams, restrict_gamma2: bool) -> np.ndarray:
    if restrict_gamma2:
        return np.array(_informed_limit_gamma(params, restrict_gamma2))
    try:
        return np.array(ree_fixed_point_closed_form(params))
    except DomainError:
        return np.array(INITIAL_GAMMA, dtype=float)


def _hybrid_refine(
    start: np.ndarray, params: MarketParams, tol: float, restrict_gamma2: bool
) -> tuple[np.ndarray, float, int]:
    """Powell hybrid root of delta(gamma) - gamma from `start`; keeps `start` if the root is worse."""

    x0 = start[:1] if restrict_gamma2 else start
    found = optimize.root(
        _fixed_point_system(params, restrict_gamma2), x0, method="hybr", options={"xtol": tol * 1e-3}
    )
    candidate = np.array([found.x[0], 0.0]) if restrict_gamma2 else np.asarray(found.x, dtype=float)

    start_residual = _safe_residual(start, params, restrict_gamma2)
    candidate_residual = _safe_residual(candidate, params, restrict_gamma2)
    logging.debug(f"hybr: {found.message} residual {candidate_residual:.3e} (start {start_residual:.3e})")
    # a root that shrank toward the origin is the no-trade limit, not a refinement
    shrank = np.hypot(*candidate) < 0.5 * np.hypot(*start)
    if candidate_residual < start_residual and not shrank:
        return candidate, candidate_residual, int(found.nfev)
    return start.astype(float), start_residual, int(found.nfev)


def solve_ree_fixed_point(
    params: MarketParams,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    restrict_gamma2: bool = False,
) -> EquilibriumSolution:
    """Solve gamma = delta(gamma) for the rational expectations price rule p = gamma1 X + gamma2 h.

    Starts from the ray solution (or gamma = (1, 0) when gamma2 is held at zero) and
    refines it with a Powell hybrid root search. If that misses the tolerance, runs a
    damped fixed-point iteration from the canonical guess (0.5, 0), then a derivative-free
    search started at the many-informed-traders limit (1, alpha sigma_eps^2 Z / N)
    followed by another damped pass. The smallest residual wins.

    Args:
        params: MarketParams, model parameters
        tol: float, maximum accepted residual max|delta - gamma|
        max_iter: int, iteration budget per fallback stage
        restrict_gamma2: bool, hold gamma2 at zero and solve for gamma1 alone
    """

    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")

    gamma, residual, iterations = _hybrid_refine(
        _ray_start(params, restrict_gamma2), params, tol, restrict_gamma2
    )
    method = "ray_hybrid"

    if residual > tol:
        logging.info(f"hybrid root stopped at residual {residual:.3e}; trying damped iteration")
        damped, damped_residual, extra = _damped_iteration(
            np.array(INITIAL_GAMMA, dtype=float), params, tol, max_iter, restrict_gamma2
        )
        iterations += extra
        if damped_residual < residual:
            gamma, residual, method = damped, damped_residual, "damped_iteration"

    if residual > tol:
        logging.info(
            f"damped iteration stopped at residual {residual:.3e}; falling back to derivative-free search"
        )
        start = np.array(_informed_limit_gamma(params, restrict_gamma2))
        found = _derivative_free_search(start, params, tol, max_iter, restrict_gamma2)
        polished, polished_residual, extra = _damped_iteration(
            found, params, tol, max_iter, restrict_gamma2
        )
        iterations += extra
        if polished_residual < residual:
            gamma, residual, method = polished, polished_residual, "derivative_free"

    if residual > tol:
        raise ConvergenceError(
            f"REE fixed point not found within {max_iter} iterations", residual, tuple(gamma)
        )

    gamma1, gamma2 = float(gamma[0]), float(gamma[1])
    theta = ree_theta(gamma1, gamma2, params)
    price = gamma1 * params.realized_signal + gamma2 * params.realized_noise
    logging.debug(f"REE fixed point gamma=({gamma1:.12g}, {gamma2:.12g}) via {method}")

    return EquilibriumSolution(
        price=price,
        coeff_informed=gamma1,
        coeff_noise=gamma2,
        conditional_mean=theta * price,
        conditional_variance=ree_conditional_variance(gamma1, gamma2, params),
        regime=Regime.REE,
        residual=residual,
        iterations=iterations,
        method=method,
    )


def _informed_limit_gamma(params: MarketParams, restrict_gamma2: bool) -> tuple[float, float]:
    if restrict_gamma2 or params.n_informed == 0:
        return 1.0, 0.0
    ratio = params.risk_aversion * params.epsilon_variance * params.z_noise / params.n_informed
    return 1.0, ratio


def ree_fixed_point_closed_form(params: MarketParams) -> tuple[float, float]:
    """Unique non-degenerate fixed point of the REE map.

    delta_2 / delta_1 = alpha sigma_eps^2 Z / N does not depend on gamma, so the fixed
    point lies on the ray gamma2 = r gamma1. Along it Var(S|p) is a constant V and
    theta = c / gamma1, which turns delta_1 = gamma1 into a linear equation.
    """

    a, s, e = params.signal_variance, params.noise_variance, params.epsilon_variance
    n, m = params.n_informed, params.m_uninformed
    base = a + (s if params.variants.noise_variance_in_price_belief else e)

    if n == 0:
        # no informed traders: the price carries noise only
        if s == 0:
            raise DomainError("price is constant without informed traders and noise variance")
        return 0.0, params.risk_aversion * base * params.z_noise / m

    r = params.risk_aversion * e * params.z_noise / n
    c = a / (a + r**2 * s)
    v = base - c * a
    gamma1 = (n * v + c * m * e) / (n * v + m * e)
    return gamma1, r * gamma1


def scan_fixed_point_residuals(
    params: MarketParams,
    gamma1_range: tuple[float, float] = (0.0, 2.0),
    gamma2_range: tuple[float, float] = (-1.0, 1.0),
    step: float = 1e-3,
    chunk_rows: int = 256,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual max|delta - gamma| on a regular grid, vectorized row chunk by row chunk.

    Returns (gamma1 axis, gamma2 axis, residual matrix); singular cells hold inf.
    """

    g1_axis = np.arange(gamma1_range[0], gamma1_range[1] + step / 2, step)
    g2_axis = np.arange(gamma2_range[0], gamma2_range[1] + step / 2, step)
    a, s, e = params.signal_variance, params.noise_variance, params.epsilon_variance
    base = a + (s if params.variants.noise_variance_in_price_belief else e)
    n, m = params.n_informed, params.m_uninformed

    residuals = np.full((g1_axis.size, g2_axis.size), np.inf)
    for start in range(0, g1_axis.size, chunk_rows):
        g1 = g1_axis[start : start + chunk_rows, None]
        g2 = g2_axis[None, :]
        var_p = g1**2 * a + g2**2 * s
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = g1 * a / var_p
            var_sp = base - g1**2 * a**2 / var_p
            denominator = n * var_sp + (1.0 - theta) * m * e
            delta1 = n * var_sp / denominator
            delta2 = params.risk_aversion * var_sp * e * params.z_noise / denominator
            block = np.maximum(np.abs(delta1 - g1), np.abs(delta2 - g2))
        valid = (var_p > DEGENERATE_PRICE_VARIANCE) & np.isfinite(block) & (denominator != 0)
        residuals[start : start + chunk_rows] = np.where(valid, block, np.inf)

    return g1_axis, g2_axis, residuals


def check_multiplicity(
    solution: EquilibriumSolution,
    params: MarketParams,
    step: float = 1e-3,
    separation: float = 1e-2,
    grid_tol: float | None = None,
) -> list[tuple[float, float, float]]:
    """Grid cells that look like a second fixed point far from the reported one.

    A cell counts when its residual is within grid_tol (default: the grid step) and it
    lies more than `separation` from the solution. Cells within ten steps of the origin
    are the degenerate no-trade limit and are skipped. Logs a warning when any are found.
    """

    grid_tol = step if grid_tol is None else grid_tol
    g1_axis, g2_axis, residuals = scan_fixed_point_residuals(params, step=step)
    rows, cols = np.nonzero(residuals <= grid_tol)
    g1, g2 = g1_axis[rows], g2_axis[cols]

    distance = np.hypot(g1 - solution.coeff_informed, g2 - solution.coeff_noise)
    radius = np.hypot(g1, g2)
    mask = (distance > separation) & (radius > 10 * step)

    others = [
        (float(x), float(y), float(r))
        for x, y, r in zip(g1[mask], g2[mask], residuals[rows, cols][mask])
    ]
    if others:
        logging.warning(
            f"{len(others)} grid cells away from gamma=({solution.coeff_informed:.6g}, "
            f"{solution.coeff_noise:.6g}) have residual <= {grid_tol}; the fixed point may not be unique"
        )
    return others


##################################### Fully revealing #######################################


def _revealed_variance(params: MarketParams) -> float:
    if params.variants.prior_std_in_revealing_price:
        return params.prior.std
    return params.epsilon_variance


def _noise_discount(params: MarketParams) -> float:
    """alpha Z Var(S|X) / (N + M), the price impact per unit of noise demand."""

    total = params.n_informed + params.m_uninformed
    if total <= 0:
        raise DomainError("fully revealing price needs N + M > 0")
    return params.risk_aversion * params.z_noise * _revealed_variance(params) / total


def fully_revealing_price(params: MarketParams) -> EquilibriumSolution:
    """p = E(S|X) - alpha Z Var(S|X) h / (N + M), with E(S|X) = X."""

    discount = _noise_discount(params)
    price = params.realized_signal - discount * params.realized_noise
    return EquilibriumSolution(
        price=price,
        coeff_informed=1.0,
        coeff_noise=-discount,
        conditional_mean=params.realized_signal,
        conditional_variance=_revealed_variance(params),
        regime=Regime.FULLY_REVEALING,
    )


def fully_revealing_price_variance(params: MarketParams) -> PriceVariance:
    """Var(p) = Var(S|X) + g (g - 2 E(S|X)) with g = alpha Z h Var(S|X) / (N + M).

    The expression is evaluated as written; negative values are flagged, not corrected.
    """

    gap = _noise_discount(params) * params.realized_noise
    bracket = gap - 2.0 * params.realized_signal
    value = _revealed_variance(params) + gap * bracket
    if value < 0:
        logging.warning(f"fully revealing price variance is negative ({value:.6g})")
    return PriceVariance(value=value, bracket=bracket, negative_variance=value < 0)


def informational_efficiency(var_p: float) -> float:
    """IE = 1 / Var(p)."""

    if not var_p > 0:
        raise DomainError(f"informational efficiency needs a positive variance, got {var_p}")
    return 1.0 / var_p


def solve(params: MarketParams, regime: Regime, **solver_options) -> EquilibriumSolution:
    """Dispatch to the solver of a regime."""

    if regime == Regime.NAIVE:
        return naive_equilibrium(params)
    if regime == Regime.REE:
        return solve_ree_fixed_point(params, **solver_options)
    return fully_revealing_price(params)


def price_variance(params: MarketParams, solution: EquilibriumSolution) -> float:
    """Analytic Var(p) of the regime's price rule over the model's randomness."""

    if solution.regime == Regime.NAIVE:
        mu_1 = posterior_weight(params.prior, params.signal_variance)
        signal_weight = solution.coeff_informed * (1.0 - mu_1)
        signal_marginal = params.prior.variance + params.signal_variance
        noise_weight = solution.coeff_noise * params.z_noise
        return signal_weight**2 * signal_marginal + noise_weight**2 * params.noise_variance
    if solution.regime == Regime.REE:
        return _price_variance(solution.coeff_informed, solution.coeff_noise, params)
    return fully_revealing_price_variance(params).value


################################### Asymptotic limits #######################################


class LimitTable(BaseModel):
    """Per-size coefficients and prices of a sweep, with the fitted convergence order."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    regime: Regime
    group: Group
    limit_price: float
    order: float
    table: pd.DataFrame


def _sized(params: MarketParams, group: Group, size: float) -> MarketParams:
    if group == Group.INFORMED:
        return params.with_sizes(size, params.m_uninformed)
    if group == Group.UNINFORMED:
        return params.with_sizes(params.n_informed, size)
    share = params.n_informed / params.total_traders
    return params.with_sizes(share * size, (1.0 - share) * size)


def limit_price(params: MarketParams, regime: Regime, group: Group) -> float:
    """Price the sweep converges to as the group's mass grows without bound."""

    if regime == Regime.FULLY_REVEALING:
        return params.realized_signal

    if regime == Regime.NAIVE:
        if group == Group.UNINFORMED:
            return params.prior.mean
        if group == Group.INFORMED:
            return informed_belief(params).mean
        # both masses scale together: theta_1 is scale free, theta_2 Z h vanishes
        noiseless = params.model_copy(update={"realized_noise": 0.0})
        return naive_equilibrium(noiseless).price

    if group == Group.UNINFORMED and params.n_informed > 0:
        a, s, e = params.signal_variance, params.noise_variance, params.epsilon_variance
        r = params.risk_aversion * e * params.z_noise / params.n_informed
        c = a / (a + r**2 * s)
        return c * params.realized_signal + r * c * params.realized_noise
    if group == Group.UNINFORMED:
        return 0.0
    return params.realized_signal


def asymptotic_limits(
    params: MarketParams,
    regime: Regime,
    group: Group,
    sizes: Sequence[float],
    **solver_options,
) -> LimitTable:
    """Sweep the size of a trader group and measure convergence of the price.

    For Group.BOTH the sizes are N + M, split in the proportions of `params`.
    The order is the slope of log|price - limit| against log size.
    """

    if len(sizes) == 0:
        raise DomainError("sizes must not be empty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DomainError("sizes must be strictly increasing")
    if sizes[0] <= 0:
        raise DomainError("sizes must be positive")

    target = limit_price(params, regime, group)
    rows = []
    for size in sizes:
        sized = _sized(params, group, size)
        solution = solve(sized, regime, **solver_options)
        rows.append(
            {
                "size": float(size),
                "n": sized.n_informed,
                "m": sized.m_uninformed,
                "price": solution.price,
                "coeff_informed": solution.coeff_informed,
                "coeff_noise": solution.coeff_noise,
                "gap": abs(solution.price - target),
            }
        )

    df = pd.DataFrame(rows)
    usable = df[df.gap > 0]
    if len(usable) >= 2:
        order = float(np.polyfit(np.log(usable["size"]), np.log(usable["gap"]), 1)[0])
    else:
        order = math.nan

    logging.info(f"{regime.value}/{group.value} sweep: fitted order {order:.4f}")
    return LimitTable(regime=regime, group=group, limit_price=target, order=order, table=df)
