"""Constant-product liquidity pool with swap fee and the price safeguard."""

import logging
import math
from enum import Enum
from typing import Literal

from pydantic import BaseModel, field_validator

from infovault.exceptions import DomainError, DustError, PoolPausedError, StateError
from infovault.tokenomics.fees import exact

SAFEGUARD_WINDOW_DAYS = 7
SAFEGUARD_THRESHOLD = 0.7


class Direction(str, Enum):
    TOKEN_TO_QUOTE = "sell"
    QUOTE_TO_TOKEN = "buy"


class PoolState(BaseModel):
    """Reserves in integer micro-units; the spot price is quote per token."""

    reserve_token: int = 0
    reserve_quote: int = 0
    lp_shares: dict[str, int] = {}
    total_shares: int = 0
    paused: bool = False
    pause_reason: str | None = None
    spot_price_history: list[tuple[int, float]] = []
    swap_fee: float = 0.0003

    @field_validator("swap_fee")
    def fee_must_be_rate(cls, v):
        if not 0 <= v < 1:
            raise ValueError("swap_fee must be in [0, 1)")
        return v

    @property
    def live(self) -> bool:
        return self.reserve_token > 0 and self.reserve_quote > 0

    @property
    def k(self) -> int:
        return self.reserve_token * self.reserve_quote

    def spot_price(self) -> float:
        if not self.live:
            raise StateError("pool has no liquidity")
        return self.reserve_quote / self.reserve_token

    def record_price(self, day: int) -> float:
        price = self.spot_price()
        if self.spot_price_history and self.spot_price_history[-1][0] == day:
            self.spot_price_history[-1] = (day, price)
        else:
            self.spot_price_history.append((day, price))
        return price


def amm_swap(pool: PoolState, amount_in: int, direction: Direction) -> int:
    """Swap `amount_in` through the pool and return the amount out.

    The whole input joins the reserve while only amount_in * (1 - fee) prices the
    trade, so k never decreases.
    """

    if pool.paused:
        raise PoolPausedError(pool.pause_reason or "pool paused")
    if not pool.live:
        raise StateError("pool has no liquidity")
    if amount_in <= 0:
        raise DomainError(f"amount_in must be > 0, got {amount_in}")

    if direction == Direction.TOKEN_TO_QUOTE:
        reserve_in, reserve_out = pool.reserve_token, pool.reserve_quote
    else:
        reserve_in, reserve_out = pool.reserve_quote, pool.reserve_token

    fee = exact(pool.swap_fee)
    effective = amount_in * (fee.denominator - fee.numerator)
    amount_out = reserve_out * effective // (reserve_in * fee.denominator + effective)
    if amount_out == 0:
        raise DustError(f"swap of {amount_in} rounds to zero output")

    k_before = pool.k
    if direction == Direction.TOKEN_TO_QUOTE:
        pool.reserve_token += amount_in
        pool.reserve_quote -= amount_out
    else:
        pool.reserve_quote += amount_in
        pool.reserve_token -= amount_out
    assert pool.k >= k_before
    return amount_out


def add_liquidity(pool: PoolState, provider: str, token_amount: int, quote_amount: int):
    """Deposit reserves for LP shares; returns (shares, token used, quote used).

    The first deposit mints isqrt(token * quote) shares. Later deposits mint the
    smaller proportional share and only take the matching amounts.
    """

    if token_amount <= 0 or quote_amount <= 0:
        raise DomainError("liquidity amounts must be > 0")

    if pool.total_shares == 0:
        shares = math.isqrt(token_amount * quote_amount)
        token_used, quote_used = token_amount, quote_amount
    else:
        shares = min(
            token_amount * pool.total_shares // pool.reserve_token,
            quote_amount * pool.total_shares // pool.reserve_quote,
        )
        token_used = min(token_amount, -(-shares * pool.reserve_token // pool.total_shares))
        quote_used = min(quote_amount, -(-shares * pool.reserve_quote // pool.total_shares))
    if shares == 0:
        raise DustError("liquidity deposit too small for one share")

    pool.reserve_token += token_used
    pool.reserve_quote += quote_used
    pool.lp_shares[provider] = pool.lp_shares.get(provider, 0) + shares
    pool.total_shares += shares
    return shares, token_used, quote_used


def remove_liquidity(pool: PoolState, provider: str, shares: int) -> tuple[int, int]:
    """Burn LP shares for the pro-rata reserves, rounded down."""

    held = pool.lp_shares.get(provider, 0)
    if shares <= 0 or shares > held:
        raise StateError(f"{provider} holds {held} shares, cannot burn {shares}")
    if shares == pool.total_shares:
        # the last provider would empty the pool
        raise StateError("cannot remove the last liquidity from a live pool")

    token_out = shares * pool.reserve_token // pool.total_shares
    quote_out = shares * pool.reserve_quote // pool.total_shares
    pool.reserve_token -= token_out
    pool.reserve_quote -= quote_out
    pool.total_shares -= shares
    if held == shares:
        del pool.lp_shares[provider]
    else:
        pool.lp_shares[provider] = held - shares
    return token_out, quote_out


def window_max(history: list[tuple[int, float]], day: int, window: int) -> float | None:
    """Highest price recorded on days day-window+1 .. day."""

    best = None
    for recorded_day, price in reversed(history):
        if recorded_day > day:
            continue
        if recorded_day <= day - window:
            break
        best = price if best is None else max(best, price)
    return best


def safeguard_check(
    pool: PoolState,
    day: int,
    window: int = SAFEGUARD_WINDOW_DAYS,
    threshold: float = SAFEGUARD_THRESHOLD,
    mode: Literal["auto", "manual"] = "auto",
) -> bool:
    """Pause the pool when the price has fallen more than 30% below the trailing-week high.

    The drop is strict: a price of exactly threshold * max does not pause. In auto mode
    the pause lifts as soon as the condition clears; in manual mode it stays until
    `release_pause`.
    """

    if not pool.spot_price_history:
        raise StateError("safeguard needs at least one recorded price")

    price = next((p for d, p in reversed(pool.spot_price_history) if d <= day), None)
    if price is None:
        raise StateError(f"no price recorded on or before day {day}")
    high = window_max(pool.spot_price_history, day, window)
    triggered = high is not None and price < threshold * high

    if triggered and not pool.paused:
        pool.pause_reason = f"price {price:.6g} below {threshold:.0%} of the {window}-day high {high:.6g} on day {day}"
        logging.warning(f"safeguard: {pool.pause_reason}")
    if triggered:
        pool.paused = True
    elif mode == "auto" and pool.paused:
        logging.info(f"safeguard: pause lifted on day {day}")
        pool.paused = False
        pool.pause_reason = None
    return pool.paused


def release_pause(pool: PoolState) -> None:
    pool.paused = False
    pool.pause_reason = None
