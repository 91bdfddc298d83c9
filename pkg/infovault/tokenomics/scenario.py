"""Scenario scripts: policy parameters, NAV return processes and dated events.

A script is one YAML document, e.g.

    days: 60
    reference_price: 1.0
    target_cefi_fraction: 0.6
    nav_returns:
      kind: gaussian
      seed: 7
    events:
      - {type: add_liquidity, day: 0, provider: founder, tokens: 50000, quote: 50000}
      - {type: purchase, day: 3, buyer: alice, fiat: 1000, settle_delay: 2}
      - {type: swap, day: 10, trader: alice, direction: sell, amount: 200}

Amounts are in whole tokens or currency units; the economy converts them to
micro-units.
"""

from typing import Annotated, Callable, Literal, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from infovault.tokenomics.amm import SAFEGUARD_THRESHOLD, SAFEGUARD_WINDOW_DAYS, Direction
from infovault.tokenomics.fees import FeeSchedule

# returns at or below -100% are cut here so a NAV never reaches zero
MIN_DAILY_RETURN = -0.99


class SafeguardPolicy(BaseModel):
    window_days: int = SAFEGUARD_WINDOW_DAYS
    threshold: float = SAFEGUARD_THRESHOLD
    mode: Literal["auto", "manual"] = "auto"

    @field_validator("window_days")
    def window_must_be_positive(cls, v):
        if v < 1:
            raise ValueError("window_days must be >= 1")
        return v

    @field_validator("threshold")
    def threshold_must_be_fraction(cls, v):
        if not 0 < v < 1:
            raise ValueError("threshold must be in (0, 1)")
        return v


class NavStep(BaseModel):
    day: int
    a_return: float = 0.0
    c_return: float = 0.0

    @field_validator("a_return", "c_return")
    def return_must_be_above_total_loss(cls, v, info):
        if v <= -1:
            raise ValueError(f"{info.field_name} must be > -1")
        return v


class NavReturnModel(BaseModel):
    """Daily returns of the two reserve funds.

    `scripted` replays `steps` (days not listed have zero return); `gaussian` draws
    independent normal daily returns from a generator seeded with `seed`.
    """

    kind: Literal["scripted", "gaussian"] = "scripted"
    steps: list[NavStep] = []
    a_mean: float = 0.0002
    a_std: float = 0.002
    c_mean: float = 0.0005
    c_std: float = 0.02
    seed: int | None = None

    @field_validator("a_std", "c_std")
    def std_must_be_nonnegative(cls, v, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0")
        return v

    def generator(self, default_seed: int = 0) -> Callable[[int], tuple[float, float]]:
        """Function day -> (a_return, c_return); call it once per day in day order."""

        if self.kind == "scripted":
            by_day = {step.day: (step.a_return, step.c_return) for step in self.steps}
            return lambda day: by_day.get(day, (0.0, 0.0))

        rng = np.random.default_rng(self.seed if self.seed is not None else default_seed)

        def draw(day: int) -> tuple[float, float]:
            a, c = rng.normal([self.a_mean, self.c_mean], [self.a_std, self.c_std])
            return max(float(a), MIN_DAILY_RETURN), max(float(c), MIN_DAILY_RETURN)

        return draw


class PurchaseEvent(BaseModel):
    type: Literal["purchase"] = "purchase"
    day: int
    buyer: str
    fiat: float
    # days until the buyer's fiat is in the vault's account
    settle_delay: int = 0

    @field_validator("fiat")
    def fiat_must_be_positive(cls, v):
        if v <= 0:
            raise ValueError("fiat must be > 0")
        return v

    @field_validator("settle_delay")
    def delay_must_be_nonnegative(cls, v):
        if v < 0:
            raise ValueError("settle_delay must be >= 0")
        return v


class SwapEvent(BaseModel):
    type: Literal["swap"] = "swap"
    day: int
    trader: str
    direction: Direction
    amount: float

    @field_validator("amount")
    def amount_must_be_positive(cls, v):
        if v <= 0:
            raise ValueError("amount must be > 0")
        return v


class AddLiquidityEvent(BaseModel):
    type: Literal["add_liquidity"] = "add_liquidity"
    day: int
    provider: str
    tokens: float
    quote: float

    @field_validator("tokens", "quote")
    def amount_must_be_positive(cls, v, info):
        if v <= 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v


class RemoveLiquidityEvent(BaseModel):
    type: Literal["remove_liquidity"] = "remove_liquidity"
    day: int
    provider: str
    fraction: float = 1.0

    @field_validator("fraction")
    def fraction_must_be_share(cls, v):
        if not 0 < v <= 1:
            raise ValueError("fraction must be in (0, 1]")
        return v


class ReleasePauseEvent(BaseModel):
    type: Literal["release_pause"] = "release_pause"
    day: int


ScenarioEvent = Annotated[
    Union[
        PurchaseEvent,
        SwapEvent,
        AddLiquidityEvent,
        RemoveLiquidityEvent,
        ReleasePauseEvent,
    ],
    Field(discriminator="type"),
]


class ScenarioScript(BaseModel):
    days: int = 30
    reference_price: float = 1.0
    fees: FeeSchedule = FeeSchedule()
    entry_fee_to_vault: bool = False
    target_cefi_fraction: float = 0.5
    rebalance_interval_days: int = 1
    month_days: int = 30
    max_cap_tokens: float = 99e9
    bootstrap: bool = True
    founder: str = "founder"
    safeguard: SafeguardPolicy = SafeguardPolicy()
    nav_returns: NavReturnModel = NavReturnModel()
    events: list[ScenarioEvent] = []

    @field_validator("days", "rebalance_interval_days", "month_days")
    def must_be_positive(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1")
        return v

    @field_validator("reference_price", "max_cap_tokens")
    def must_be_positive_amount(cls, v, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v

    @field_validator("target_cefi_fraction")
    def target_must_respect_crypto_limit(cls, v):
        if not 0.5 <= v <= 1:
            raise ValueError("target_cefi_fraction must be in [0.5, 1]")
        return v

    @model_validator(mode="after")
    def events_must_fall_inside_run(self):
        for event in self.events:
            if not 0 <= event.day < self.days:
                raise ValueError(f"event on day {event.day} outside 0..{self.days - 1}")
        return self

    def events_by_day(self) -> dict[int, list]:
        """Events grouped by day, keeping their order in the script."""

        grouped = {}
        for event in self.events:
            grouped.setdefault(event.day, []).append(event)
        return grouped
