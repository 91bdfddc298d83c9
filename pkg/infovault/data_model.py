import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class Regime(str, Enum):
    NAIVE = "naive"
    REE = "ree"
    FULLY_REVEALING = "fully_revealing"


class Group(str, Enum):
    INFORMED = "informed"
    UNINFORMED = "uninformed"
    BOTH = "both"


class Gaussian(BaseModel):
    """A normal belief N(mean, variance)."""

    model_config = ConfigDict(frozen=True)

    mean: float
    variance: float

    @field_validator("mean")
    def mean_must_be_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("mean must be finite")
        return v

    @field_validator("variance")
    def variance_must_be_nonnegative(cls, v):
        if math.isnan(v) or v < 0:
            raise ValueError("variance must be >= 0")
        return v

    @property
    def precision(self) -> float:
        """Inverse variance; infinite for a degenerate belief."""
        if self.variance == 0:
            return math.inf
        return 1.0 / self.variance

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


class JointGaussianPair(BaseModel):
    """Bivariate normal (a, b) described by its first two moments."""

    model_config = ConfigDict(frozen=True)

    mean_a: float
    mean_b: float
    var_a: float
    var_b: float
    cov_ab: float

    @model_validator(mode="after")
    def moments_must_be_consistent(self):
        if self.var_a < 0 or self.var_b < 0:
            raise ValueError("variances must be >= 0")
        # relative slack for round-off in products of large variances
        bound = self.var_a * self.var_b
        if self.cov_ab**2 > bound * (1 + 1e-12) + 1e-300:
            raise ValueError("cov_ab**2 must not exceed var_a * var_b")
        return self


class FormulaVariants(BaseModel):
    """Alternative readings of three closed forms; all off gives the derivation-consistent results."""

    model_config = ConfigDict(frozen=True)

    # naive denominator N*Var(S|X) + M*Var(S) instead of N*Var(S) + M*Var(S|X)
    swapped_naive_denominator: bool = False
    # Var(S|p) with sigma_h^2 in place of sigma_eps^2 as the base variance
    noise_variance_in_price_belief: bool = False
    # Var(S|X) = sigma_S (the prior standard deviation) in the fully revealing price
    prior_std_in_revealing_price: bool = False


class MarketParams(BaseModel):
    """Parameters of the single risky asset market with informed, uninformed and noise traders."""

    model_config = ConfigDict(frozen=True)

    n_informed: float = 10.0
    m_uninformed: float = 10.0
    z_noise: float = 1.0
    risk_aversion: float = 2.0
    prior: Gaussian = Gaussian(mean=10.0, variance=1.0)
    signal_variance: float = 1.0
    noise_variance: float = 1.0
    epsilon_variance: float = 1.0
    realized_signal: float = 10.0
    realized_noise: float = 0.0
    variants: FormulaVariants = FormulaVariants()

    @field_validator("n_informed", "m_uninformed", "z_noise", "noise_variance")
    def must_be_nonnegative(cls, v, info):
        if math.isnan(v) or v < 0:
            raise ValueError(f"{info.field_name} must be >= 0")
        return v

    @field_validator("risk_aversion", "signal_variance", "epsilon_variance")
    def must_be_positive(cls, v, info):
        if math.isnan(v) or v <= 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v

    @field_validator("prior")
    def prior_must_be_proper(cls, v):
        if v.variance <= 0:
            raise ValueError("prior variance must be > 0")
        return v

    @model_validator(mode="after")
    def must_have_traders(self):
        if self.n_informed + self.m_uninformed <= 0:
            raise ValueError("n_informed + m_uninformed must be > 0")
        return self

    @property
    def total_traders(self) -> float:
        return self.n_informed + self.m_uninformed

    def with_sizes(self, n_informed: float, m_uninformed: float) -> "MarketParams":
        return self.model_copy(
            update={"n_informed": float(n_informed), "m_uninformed": float(m_uninformed)}
        )


class EquilibriumSolution(BaseModel):
    """Equilibrium price with its coefficient decomposition."""

    model_config = ConfigDict(frozen=True)

    price: float
    coeff_informed: float
    coeff_noise: float
    conditional_mean: float
    conditional_variance: float
    regime: Regime
    residual: float = 0.0
    iterations: int = 0
    method: str = "closed_form"

    @field_validator("coeff_informed", "coeff_noise")
    def coefficients_must_be_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("coefficients must be finite")
        return v


class PriceVariance(BaseModel):
    """Variance of the fully revealing price, flagged when the formula goes negative."""

    model_config = ConfigDict(frozen=True)

    value: float
    bracket: float
    negative_variance: bool
