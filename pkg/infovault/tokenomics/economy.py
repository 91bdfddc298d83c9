"""Minting, oracle ticks, monthly rewards and redemption, and the day-by-day economy runner."""

import json
import logging
import math
from fractions import Fraction
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from infovault.exceptions import (
    CapExceededError,
    DomainError,
    DustError,
    PoolPausedError,
    StateError,
)
from infovault.tokenomics.amm import (
    Direction,
    PoolState,
    add_liquidity,
    amm_swap,
    release_pause,
    remove_liquidity,
    safeguard_check,
)
from infovault.tokenomics.fees import FeeSchedule, exact
from infovault.tokenomics.ledger import SupplyLedger
from infovault.tokenomics.scenario import (
    AddLiquidityEvent,
    PurchaseEvent,
    ReleasePauseEvent,
    RemoveLiquidityEvent,
    ScenarioScript,
    SwapEvent,
)
from infovault.tokenomics.vault import MIN_CEFI_FRACTION, VaultState, advance_nav, allocate_reserves
from infovault.utils import MICRO, from_micro, state_hash, to_micro

BOOTSTRAP_TOKENS = 250_000 * MICRO

DAY_COLUMNS = [
    "day",
    "supply",
    "team_wallet",
    "pledged_value",
    "spot_price",
    "paused",
    "redemption_value",
]


class PurchaseOrder(BaseModel):
    """A primary purchase whose fiat reaches the vault on `settle_day`."""

    model_config = ConfigDict(frozen=True)

    buyer: str
    fiat: int
    order_day: int
    settle_day: int


class EpochReport(BaseModel):
    month: int
    nav_return: float
    performance_fee_taken: int
    management_fee_taken: int
    rewards_minted: int
    distribution: dict[str, int]
    clamped: bool = False


def tokens_for(fiat: int, reference_price: float) -> int:
    """Micro-tokens bought by `fiat` micro-units at the reference price, rounded down."""

    price = exact(reference_price)
    return fiat * price.denominator // price.numerator


def process_primary_purchase(
    ledger: SupplyLedger,
    vault: VaultState,
    fiat_in: int,
    reference_price: float,
    fees: FeeSchedule = FeeSchedule(),
    day: int = 0,
    buyer: str = "buyer",
    entry_fee_to_vault: bool = False,
) -> tuple[int, int]:
    """Mint tokens against fiat pledged to the vault.

    The entry fee comes off first, the net fiat buys tokens at the reference price and
    the team premium is 4% of the user's tokens within the 4%-of-supply limit.
    Nothing changes when the mint is refused.
    """

    if fiat_in <= 0:
        raise DomainError(f"fiat_in must be > 0, got {fiat_in}")
    if not reference_price > 0:
        raise DomainError(f"reference_price must be > 0, got {reference_price}")

    fee = fees.entry_fee_on(fiat_in)
    net = fiat_in - fee
    tokens_to_user = tokens_for(net, reference_price)
    if tokens_to_user == 0:
        raise DustError(f"{fiat_in} buys less than one micro-token")
    if tokens_to_user > ledger.remaining_cap:
        raise CapExceededError(
            f"minting {tokens_to_user} exceeds the remaining cap {ledger.remaining_cap}"
        )
    tokens_to_team = ledger.team_premium(tokens_to_user)

    if entry_fee_to_vault:
        vault.deposit(fiat_in)
    else:
        vault.deposit(net)
        vault.operator_balance += fee
    ledger.mint(day, tokens_to_user, "user", holder=buyer)
    if tokens_to_team > 0:
        ledger.mint(day, tokens_to_team, "team")
    return tokens_to_user, tokens_to_team


def bootstrap(
    vault: VaultState,
    ledger: SupplyLedger,
    reference_price: float = 1.0,
    day: int = 0,
    founder: str = "founder",
) -> SupplyLedger:
    """First mint of 250,000 tokens against the founder deposit, free of fees and premium."""

    if ledger.mint_history:
        raise StateError("bootstrap needs an empty ledger")

    deposit = math.floor(BOOTSTRAP_TOKENS * exact(reference_price))
    ledger.mint(day, BOOTSTRAP_TOKENS, "user", holder=founder)
    vault.deposit(deposit)
    logging.info(f"bootstrap: {from_micro(BOOTSTRAP_TOKENS):,.0f} tokens to {founder}")
    return ledger


def daily_oracle_tick(
    day: int,
    pending_purchases: list[PurchaseOrder],
    vault: VaultState,
    ledger: SupplyLedger,
    pool: PoolState,
    fees: FeeSchedule = FeeSchedule(),
    reference_price: float = 1.0,
    entry_fee_to_vault: bool = False,
) -> list[dict]:
    """Mint every settled purchase in order and record the pool spot price.

    Orders whose fiat is not yet in the vault are deferred, orders that would cross the
    cap are refused; both show up in the returned events.
    """

    if day <= ledger.oracle_day:
        raise StateError(f"oracle day {day} does not follow day {ledger.oracle_day}")
    ledger.oracle_day = day

    events = []
    for order in pending_purchases:
        if order.settle_day > day:
            events.append(
                {"operation": "deferred", "args": {"buyer": order.buyer, "fiat": order.fiat}}
            )
            continue
        try:
            user, team = process_primary_purchase(
                ledger, vault, order.fiat, reference_price, fees, day, order.buyer, entry_fee_to_vault
            )
        except (CapExceededError, DustError) as e:
            logging.info(f"day {day}: purchase by {order.buyer} refused: {e}")
            events.append(
                {
                    "operation": "refused",
                    "args": {"buyer": order.buyer, "fiat": order.fiat, "reason": str(e)},
                }
            )
            continue
        events.append(
            {
                "operation": "mint",
                "args": {"buyer": order.buyer, "fiat": order.fiat, "user": user, "team": team},
            }
        )

    if pool.live:
        events.append({"operation": "price", "args": {"spot": pool.record_price(day)}})
    return events


def distribute(total: int, shares: dict[str, int]) -> dict[str, int]:
    """Split `total` pro-rata to `shares` by cumulative floor division; the parts sum to `total`."""

    total_shares = sum(shares.values())
    if total_shares == 0:
        return {}

    distribution = {}
    cumulative, allotted = 0, 0
    for holder in sorted(shares):
        cumulative += shares[holder]
        upto = total * cumulative // total_shares
        if upto > allotted:
            distribution[holder] = upto - allotted
        allotted = upto
    return distribution


def monthly_rewards(
    month: int,
    vault: VaultState,
    ledger: SupplyLedger,
    pool: PoolState,
    fees: FeeSchedule = FeeSchedule(),
    reference_price: float = 1.0,
    day: int | None = None,
) -> EpochReport:
    """Month-end fees and reward mint.

    The monthly return is time weighted: the chained growth of the pledged value across
    the month's NAV moves, so deposits and withdrawals do not dilute it. Management
    fees are always charged; a positive gain also pays the performance fee and the rest
    of the gain is minted as reward tokens for the liquidity providers.
    """

    if month <= ledger.last_epoch:
        raise StateError(f"month {month} does not follow month {ledger.last_epoch}")
    ledger.last_epoch = month
    day = ledger.oracle_day if day is None else day

    pledged = vault.pledged_value
    gain = vault.nav_gain
    nav_return = float(vault.period_growth - 1)

    management, vault.fee_carry = fees.management_fee(pledged, vault.fee_carry)
    performance = fees.performance_fee(gain, nav_return)
    charged = min(management + performance, pledged)
    vault.withdraw(charged)
    vault.operator_balance += charged
    vault.nav_gain = 0
    vault.period_growth = Fraction(1)

    rewards, clamped, distribution = 0, False, {}
    reward_value = gain - performance - management
    if gain > 0 and reward_value > 0:
        rewards = tokens_for(reward_value, reference_price)
        if rewards > ledger.remaining_cap:
            rewards, clamped = ledger.remaining_cap, True
            logging.warning(f"month {month}: reward mint clamped to the remaining cap")
        distribution = distribute(rewards, pool.lp_shares)
        for provider, amount in distribution.items():
            ledger.mint(day, amount, "reward", holder=provider)
        rewards = sum(distribution.values())

    logging.info(
        f"month {month}: return {nav_return:.4%}, fees {from_micro(charged):,.2f}, "
        f"rewards {from_micro(rewards):,.2f}"
    )
    return EpochReport(
        month=month,
        nav_return=nav_return,
        performance_fee_taken=performance,
        management_fee_taken=management,
        rewards_minted=rewards,
        distribution=distribution,
        clamped=clamped,
    )


def redemption_value(vault: VaultState, ledger: SupplyLedger) -> float:
    """Pledged value per token, counting vested team tokens as circulating."""

    supply = ledger.circulating + ledger.vested_team()
    if supply == 0:
        raise DomainError("no tokens in circulation")
    return vault.pledged_value / supply


class TokenEconomy:
    """Runs a scenario script one simulated day at a time.

    Each day: NAV move, scripted events, oracle tick, rebalance, safeguard check and,
    on the last day of a month, fees and rewards. Every operation goes to the event log
    together with a hash of the balances.
    """

    def __init__(self, script: ScenarioScript, seed: int = 0) -> None:
        self.script = script
        self.vault = VaultState()
        self.ledger = SupplyLedger(max_cap=to_micro(script.max_cap_tokens))
        self.pool = PoolState(swap_fee=script.fees.swap_fee)
        self.pending: list[PurchaseOrder] = []
        self.quote_balances: dict[str, int] = {}
        self.events: list[dict] = []
        self.reports: list[EpochReport] = []
        self.expected_pledged = 0
        self.crypto_share_at_rebalance = Fraction(0)
        self._nav_returns = script.nav_returns.generator(seed)
        self._events_by_day = script.events_by_day()

    def snapshot(self) -> dict:
        return {
            "circulating": self.ledger.circulating,
            "team_wallet": self.ledger.team_wallet,
            "wallets": dict(sorted(self.ledger.wallets.items())),
            "fiat": self.vault.fiat_balance,
            "a_units": self.vault.a_raif_units,
            "a_nav": self.vault.a_raif_nav,
            "c_units": self.vault.c_raif_units,
            "c_nav": self.vault.c_raif_nav,
            "operator": self.vault.operator_balance,
            "reserve_token": self.pool.reserve_token,
            "reserve_quote": self.pool.reserve_quote,
            "total_shares": self.pool.total_shares,
            "paused": self.pool.paused,
        }

    def log(self, day: int, operation: str, args: dict) -> None:
        self.events.append(
            {
                "day": day,
                "seq": len(self.events),
                "operation": operation,
                "args": args,
                "balances": state_hash(self.snapshot()),
            }
        )

    def _track(self, change) -> None:
        before = self.vault.pledged_value
        change()
        self.expected_pledged += self.vault.pledged_value - before

    def bootstrap(self) -> None:
        self._track(
            lambda: bootstrap(
                self.vault, self.ledger, self.script.reference_price, 0, self.script.founder
            )
        )
        self.log(0, "bootstrap", {"founder": self.script.founder, "tokens": BOOTSTRAP_TOKENS})

    def apply_event(self, day: int, event) -> None:
        """Apply one scripted event; operations the state does not allow are logged as rejected."""

        try:
            if isinstance(event, PurchaseEvent):
                order = PurchaseOrder(
                    buyer=event.buyer,
                    fiat=to_micro(event.fiat),
                    order_day=day,
                    settle_day=day + event.settle_delay,
                )
                self.pending.append(order)
                self.log(day, "order", order.model_dump())
            elif isinstance(event, SwapEvent):
                self._swap(day, event)
            elif isinstance(event, AddLiquidityEvent):
                tokens = to_micro(event.tokens)
                if self.ledger.balance(event.provider) < tokens:
                    raise StateError(f"{event.provider} holds too few tokens to add {tokens}")
                shares, used, quote = add_liquidity(
                    self.pool, event.provider, tokens, to_micro(event.quote)
                )
                self.ledger.debit(event.provider, used)
                self.quote_balances[event.provider] = self.quote_balances.get(event.provider, 0) - quote
                self.log(
                    day,
                    "add_liquidity",
                    {"provider": event.provider, "shares": shares, "tokens": used, "quote": quote},
                )
            elif isinstance(event, RemoveLiquidityEvent):
                held = self.pool.lp_shares.get(event.provider, 0)
                shares = math.floor(held * exact(event.fraction))
                tokens, quote = remove_liquidity(self.pool, event.provider, shares)
                self.ledger.credit(event.provider, tokens)
                self.quote_balances[event.provider] = self.quote_balances.get(event.provider, 0) + quote
                self.log(
                    day,
                    "remove_liquidity",
                    {"provider": event.provider, "shares": shares, "tokens": tokens, "quote": quote},
                )
            elif isinstance(event, ReleasePauseEvent):
                release_pause(self.pool)
                self.log(day, "release_pause", {})
        except (StateError, PoolPausedError, DustError, DomainError) as e:
            logging.debug(f"day {day}: {event.type} rejected: {e}")
            self.log(day, "rejected", {"event": event.type, "reason": str(e)})

    def _swap(self, day: int, event: SwapEvent) -> None:
        amount = to_micro(event.amount)
        trader = event.trader
        if event.direction == Direction.TOKEN_TO_QUOTE:
            if self.ledger.balance(trader) < amount:
                raise StateError(f"{trader} holds {self.ledger.balance(trader)}, cannot sell {amount}")
            out = amm_swap(self.pool, amount, event.direction)
            self.ledger.debit(trader, amount)
            self.quote_balances[trader] = self.quote_balances.get(trader, 0) + out
        else:
            out = amm_swap(self.pool, amount, event.direction)
            self.ledger.credit(trader, out)
            self.quote_balances[trader] = self.quote_balances.get(trader, 0) - amount
        self.log(
            day,
            "swap",
            {"trader": trader, "direction": event.direction.value, "in": amount, "out": out},
        )

    def step(self, day: int) -> dict:
        script = self.script

        if day > 0:
            a_return, c_return = self._nav_returns(day)
            if a_return or c_return:
                self._track(lambda: advance_nav(self.vault, a_return, c_return))
                self.log(day, "nav", {"a_return": a_return, "c_return": c_return})

        for event in self._events_by_day.get(day, []):
            self.apply_event(day, event)

        before = self.vault.pledged_value
        tick = daily_oracle_tick(
            day,
            self.pending,
            self.vault,
            self.ledger,
            self.pool,
            script.fees,
            script.reference_price,
            script.entry_fee_to_vault,
        )
        self.expected_pledged += self.vault.pledged_value - before
        for event in tick:
            self.log(day, event["operation"], event["args"])
        self.pending = [order for order in self.pending if order.settle_day > day]

        if day % script.rebalance_interval_days == 0 and self.vault.pledged_value > 0:
            allocate_reserves(self.vault, script.target_cefi_fraction)
            self.crypto_share_at_rebalance = self.vault.crypto_share

        if self.pool.spot_price_history:
            was_paused = self.pool.paused
            safeguard_check(
                self.pool,
                day,
                script.safeguard.window_days,
                script.safeguard.threshold,
                script.safeguard.mode,
            )
            if self.pool.paused != was_paused:
                self.log(day, "pause" if self.pool.paused else "unpause", {"reason": self.pool.pause_reason})

        if (day + 1) % script.month_days == 0:
            month = (day + 1) // script.month_days
            before = self.vault.pledged_value
            report = monthly_rewards(
                month, self.vault, self.ledger, self.pool, script.fees, script.reference_price, day
            )
            self.expected_pledged += self.vault.pledged_value - before
            self.reports.append(report)
            self.log(day, "epoch", report.model_dump())

        return self.day_row(day)

    def day_row(self, day: int) -> dict:
        try:
            redemption = redemption_value(self.vault, self.ledger)
        except DomainError:
            redemption = math.nan
        return {
            "day": day,
            "supply": from_micro(self.ledger.total_supply),
            "team_wallet": from_micro(self.ledger.team_wallet),
            "pledged_value": from_micro(self.vault.pledged_value),
            "spot_price": self.pool.spot_price() if self.pool.live else math.nan,
            "paused": self.pool.paused,
            "redemption_value": redemption,
        }

    def check_invariants(self, full: bool = False) -> None:
        """Raise StateError listing every violated invariant; `full` also replays the ledger."""

        ledger, vault, pool = self.ledger, self.vault, self.pool
        violations = []
        if ledger.total_supply > ledger.max_cap:
            violations.append("supply above the cap")
        if 24 * ledger.team_wallet > ledger.circulating:
            violations.append("team wallet above 4% of the supply")
        if min(vault.fiat_balance, vault.a_raif_units, vault.c_raif_units) < 0:
            violations.append("negative vault balance")
        if self.crypto_share_at_rebalance > 1 - exact(MIN_CEFI_FRACTION):
            violations.append(
                f"crypto share {float(self.crypto_share_at_rebalance):.4f} above the limit at the last rebalance"
            )
        if vault.pledged_value != self.expected_pledged:
            violations.append(
                f"pledged value {vault.pledged_value} does not reconcile with flows {self.expected_pledged}"
            )
        if sum(pool.lp_shares.values()) != pool.total_shares:
            violations.append("LP shares do not sum to the total")
        if pool.total_shares > 0 and not pool.live:
            violations.append("pool has shares but no reserves")
        if sum(ledger.wallets.values()) + pool.reserve_token != ledger.circulating:
            violations.append("wallets and pool do not add up to the circulating supply")
        if min(ledger.wallets.values(), default=0) < 0:
            violations.append("negative wallet balance")
        if full and not ledger.replays_exactly():
            violations.append("mint history does not replay to the balances")
        if violations:
            raise StateError("; ".join(violations))

    def run(self, progress: bool = False, check: bool = True) -> pd.DataFrame:
        """Run the whole script and return one row per day."""

        if self.script.bootstrap:
            self.bootstrap()

        rows = []
        for day in tqdm(range(self.script.days), disable=not progress):
            rows.append(self.step(day))
            if check:
                self.check_invariants()
        if check:
            self.check_invariants(full=True)

        minted = sum(1 for event in self.events if event["operation"] == "mint")
        logging.info(f"simulated {self.script.days} days, {minted} purchase mints")
        return pd.DataFrame(rows, columns=DAY_COLUMNS)

    def write_events(self, path: Path) -> None:
        with open(path, "w") as f:
            for event in self.events:
                f.write(json.dumps(event, sort_keys=True) + "\n")
