"""Collateral vault: fiat plus units of the traditional (A) and crypto (C) reserve funds."""

import logging
import math
from fractions import Fraction

from pydantic import BaseModel, ConfigDict, field_validator

from infovault.exceptions import DomainError, PolicyViolationError, StateError
from infovault.tokenomics.fees import exact

# NAVs are integers: money micro-units per fund micro-unit, scaled by NAV_SCALE
NAV_SCALE = 10**12
MIN_CEFI_FRACTION = 0.5


class VaultState(BaseModel):
    """Vault balances in integer micro-units.

    `operator_balance` holds fees paid out of the vault and is not part of the pledged value.
    `nav_gain` accumulates the value change caused by NAV moves since the last epoch,
    `period_growth` the product of the per-move growth factors of the pledged value over the
    same span (deposits and withdrawals do not enter it) and `fee_carry` the sub-micro
    remainder of the management fee.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    fiat_balance: int = 0
    a_raif_units: int = 0
    a_raif_nav: int = NAV_SCALE
    c_raif_units: int = 0
    c_raif_nav: int = NAV_SCALE
    operator_balance: int = 0
    nav_gain: int = 0
    period_growth: Fraction = Fraction(1)
    fee_carry: Fraction = Fraction(0)

    @field_validator("fiat_balance", "a_raif_units", "c_raif_units", "operator_balance")
    def must_be_nonnegative(cls, v, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0")
        return v

    @field_validator("a_raif_nav", "c_raif_nav")
    def nav_must_be_positive(cls, v, info):
        if v <= 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v

    @property
    def a_raif_value(self) -> int:
        return self.a_raif_units * self.a_raif_nav // NAV_SCALE

    @property
    def c_raif_value(self) -> int:
        return self.c_raif_units * self.c_raif_nav // NAV_SCALE

    @property
    def pledged_value(self) -> int:
        return self.fiat_balance + self.a_raif_value + self.c_raif_value

    @property
    def crypto_share(self) -> Fraction:
        """Share of the invested reserves held in the crypto fund."""

        invested = self.a_raif_value + self.c_raif_value
        if invested == 0:
            return Fraction(0)
        return Fraction(self.c_raif_value, invested)

    def deposit(self, amount: int) -> None:
        if amount < 0:
            raise DomainError(f"deposit must be >= 0, got {amount}")
        self.fiat_balance += amount

    def withdraw(self, amount: int) -> int:
        """Take `amount` out of the pledged value: fiat first, then A units, then C units.

        Units are sold in whole micro-units; any sale proceeds above what is needed stay
        in fiat, so the pledged value drops by exactly `amount`.
        """

        if amount < 0:
            raise DomainError(f"withdrawal must be >= 0, got {amount}")
        if amount > self.pledged_value:
            raise StateError(f"cannot withdraw {amount} from a vault worth {self.pledged_value}")

        for leg in ("a_raif", "c_raif"):
            shortfall = amount - self.fiat_balance
            if shortfall <= 0:
                break
            self._sell(leg, shortfall)

        self.fiat_balance -= amount
        return amount

    def _sell(self, leg: str, value: int) -> None:
        units = getattr(self, f"{leg}_units")
        nav = getattr(self, f"{leg}_nav")
        before = units * nav // NAV_SCALE
        sold = min(units, math.ceil(Fraction(value * NAV_SCALE, nav)))
        setattr(self, f"{leg}_units", units - sold)
        self.fiat_balance += before - (units - sold) * nav // NAV_SCALE


def allocate_reserves(vault: VaultState, target_cefi_fraction: float) -> VaultState:
    """Rebalance the vault so that the A fund holds `target_cefi_fraction` of its value.

    A pure asset swap: leg values are floored to whole fund micro-units and the
    rounding stays in fiat, so the pledged value is unchanged and the crypto share
    of the invested reserves never exceeds 1 - target_cefi_fraction.
    """

    if not MIN_CEFI_FRACTION <= target_cefi_fraction <= 1:
        raise PolicyViolationError(
            f"at least {MIN_CEFI_FRACTION:.0%} of the reserves go to the traditional fund, "
            f"got target {target_cefi_fraction}"
        )

    target = exact(target_cefi_fraction)
    total = vault.pledged_value

    a_budget = total - math.floor(total * (1 - target))
    a_units = a_budget * NAV_SCALE // vault.a_raif_nav
    a_value = a_units * vault.a_raif_nav // NAV_SCALE

    # bound the C leg by the A leg actually bought, not by the budget
    if target == 1:
        c_budget = 0
    else:
        c_budget = min(total - a_value, math.floor(a_value * (1 - target) / target))
    c_units = c_budget * NAV_SCALE // vault.c_raif_nav
    c_value = c_units * vault.c_raif_nav // NAV_SCALE

    vault.a_raif_units = a_units
    vault.c_raif_units = c_units
    vault.fiat_balance = total - a_value - c_value
    logging.debug(f"rebalanced vault: A {a_value}, C {c_value}, fiat {vault.fiat_balance}")
    return vault


def advance_nav(vault: VaultState, a_return: float, c_return: float) -> VaultState:
    """Move both NAVs by one period's returns; units are unchanged."""

    for r in (a_return, c_return):
        if not math.isfinite(r) or r <= -1:
            raise DomainError(f"returns must be finite and > -1, got {r}")

    before = vault.pledged_value
    vault.a_raif_nav = max(1, math.floor(vault.a_raif_nav * (1 + Fraction(a_return))))
    vault.c_raif_nav = max(1, math.floor(vault.c_raif_nav * (1 + Fraction(c_return))))
    after = vault.pledged_value
    vault.nav_gain += after - before
    if before > 0:
        vault.period_growth *= Fraction(after, before)
    return vault