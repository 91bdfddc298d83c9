"""Normal-distribution primitives: conjugate posterior and the projection theorem."""

import math

from infovault.data_model import Gaussian, JointGaussianPair
from infovault.exceptions import DomainError


def posterior_weight(prior: Gaussian, signal_noise_variance: float) -> float:
    """Weight mu_1 = lambda_S / (lambda_S + lambda_X) that the posterior mean puts on the prior mean."""

    if prior.variance <= 0:
        raise DomainError(f"prior variance must be > 0, got {prior.variance}")
    if not signal_noise_variance > 0:
        raise DomainError(f"signal noise variance must be > 0, got {signal_noise_variance}")

    lambda_s = 1.0 / prior.variance
    lambda_x = 0.0 if math.isinf(signal_noise_variance) else 1.0 / signal_noise_variance
    return lambda_s / (lambda_s + lambda_x)


def posterior(
    prior: Gaussian, signal_noise_variance: float, observed_signal: float
) -> Gaussian:
    """Posterior of S given a signal X | S ~ N(S, signal_noise_variance).

    Precisions add: lambda_n = lambda_S + lambda_X, and the mean is the
    precision-weighted average of the prior mean and the observed signal.
    An infinite signal variance is an uninformative signal and returns the prior.

    Args:
        prior: Gaussian, prior belief N(S, sigma_S^2)
        signal_noise_variance: float, variance sigma_X^2 of the signal around S
        observed_signal: float, realized signal X
    """

    mu_1 = posterior_weight(prior, signal_noise_variance)
    if mu_1 == 1.0:
        return prior

    lambda_s = 1.0 / prior.variance
    lambda_x = 1.0 / signal_noise_variance
    lambda_n = lambda_s + lambda_x
    mean = (lambda_s * prior.mean + lambda_x * observed_signal) / lambda_n
    return Gaussian(mean=mean, variance=1.0 / lambda_n)


def project(joint: JointGaussianPair, observed_b: float) -> Gaussian:
    """Distribution of a conditional on b = observed_b (projection theorem for normals)."""

    if joint.var_b <= 0:
        raise DomainError(f"cannot condition on a variable with variance {joint.var_b}")

    beta = joint.cov_ab / joint.var_b
    mean = joint.mean_a + beta * (observed_b - joint.mean_b)
    # clip round-off below zero for perfectly correlated pairs
    variance = max(joint.var_a - joint.cov_ab * beta, 0.0)
    return Gaussian(mean=mean, variance=variance)


def joint_of_price(
    gamma1: float,
    gamma2: float,
    signal_variance: float,
    epsilon_variance: float,
    noise_variance: float,
) -> JointGaussianPair:
    """Joint of (S, p) for S = X + eps and the conjectured price rule p = gamma1*X + gamma2*h.

    Means are normalized to zero; only second moments enter the price-conditional belief.
    """

    var_s = signal_variance + epsilon_variance
    var_p = gamma1**2 * signal_variance + gamma2**2 * noise_variance
    cov = gamma1 * signal_variance
    return JointGaussianPair(mean_a=0.0, mean_b=0.0, var_a=var_s, var_b=var_p, cov_ab=cov)
