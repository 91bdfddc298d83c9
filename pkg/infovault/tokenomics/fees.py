"""Swap, entry, management and performance fees."""

import math
from fractions import Fraction

from pydantic import BaseModel, ConfigDict, field_validator, model_validator


def exact(rate: float) -> Fraction:
    """Decimal rate as an exact fraction (0.0003 -> 3/10000)."""
    return Fraction(str(rate))


class PerformanceTier(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float
    # None: unbounded above
    upper: float | None = None
    rate: float

    @field_validator("rate")
    def rate_must_be_a_fraction(cls, v):
        if not 0 <= v <= 1:
            raise ValueError("tier rate must be in [0, 1]")
        return v


DEFAULT_TIERS = [
    PerformanceTier(lower=0.0, upper=0.09, rate=0.10),
    PerformanceTier(lower=0.09, upper=0.20, rate=0.15),
    PerformanceTier(lower=0.20, upper=None, rate=0.25),
]


class FeeSchedule(BaseModel):
    """Fee rates of the vault and the liquidity pool.

    Performance tiers are left-closed, right-open brackets of the monthly return and
    the selected rate applies to the whole monthly gain.
    """

    model_config = ConfigDict(frozen=True)

    swap_fee: float = 0.0003
    entry_fee: float = 0.05
    management_fee_annual: float = 0.02
    performance_tiers: list[PerformanceTier] = DEFAULT_TIERS

    @field_validator("swap_fee", "entry_fee", "management_fee_annual")
    def must_be_rate(cls, v, info):
        if not 0 <= v < 1:
            raise ValueError(f"{info.field_name} must be in [0, 1)")
        return v

    @model_validator(mode="after")
    def tiers_must_cover_half_line(self):
        tiers = self.performance_tiers
        if not tiers:
            raise ValueError("at least one performance tier is required")
        if tiers[0].lower != 0:
            raise ValueError("performance tiers must start at 0")
        if tiers[-1].upper is not None:
            raise ValueError("the last performance tier must be unbounded")
        for left, right in zip(tiers, tiers[1:]):
            if left.upper is None or left.upper != right.lower:
                raise ValueError(f"tiers must be contiguous, gap at {left.upper}")
        for tier in tiers[:-1]:
            if not tier.lower < tier.upper:
                raise ValueError(f"empty tier [{tier.lower}, {tier.upper})")
        return self

    def tier_rate(self, monthly_return: float) -> float:
        """Performance fee rate of the bracket containing `monthly_return` (0 below 0)."""

        for tier in self.performance_tiers:
            if tier.lower <= monthly_return and (tier.upper is None or monthly_return < tier.upper):
                return tier.rate
        return 0.0

    def performance_fee(self, gain: int, monthly_return: float) -> int:
        """Fee on a monthly NAV gain in micro-units, rounded down."""

        if gain <= 0:
            return 0
        return math.floor(gain * exact(self.tier_rate(monthly_return)))

    def entry_fee_on(self, fiat_in: int) -> int:
        return math.floor(fiat_in * exact(self.entry_fee))

    def management_fee(self, reserve_value: int, carry: Fraction = Fraction(0)) -> tuple[int, Fraction]:
        """Monthly management fee on `reserve_value` and the sub-micro remainder to carry forward.

        Carrying the remainder makes twelve months on a constant reserve total
        floor(annual_rate * reserve) exactly.
        """

        accrued = reserve_value * exact(self.management_fee_annual) / 12 + carry
        fee = math.floor(accrued)
        return fee, accrued - fee
