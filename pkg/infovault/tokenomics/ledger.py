"""Token supply ledger: circulating supply, team wallet, holder wallets and the mint history."""

from typing import Literal

from pydantic import BaseModel, ConfigDict

from infovault.exceptions import CapExceededError, DomainError, StateError
from infovault.utils import MICRO

MAX_CAP = 99 * 10**9 * MICRO
# team premium: 4 tokens per 100 minted to users, never above 4% of the total supply
TEAM_PREMIUM_PERCENT = 4
TEAM_ACCOUNT = "team"


class MintRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    day: int
    amount: int
    kind: Literal["user", "team", "reward"]
    holder: str


class SupplyLedger(BaseModel):
    """Integer micro-token balances of the token contract.

    Team premiums sit in `team_wallet`; every other mint is circulating and credited to
    a holder wallet. Tokens held by the liquidity pool are circulating but not in `wallets`.
    """

    circulating: int = 0
    team_wallet: int = 0
    max_cap: int = MAX_CAP
    mint_history: list[MintRecord] = []
    wallets: dict[str, int] = {}
    cumulative_user_mints: int = 0
    vesting_horizon: int | None = None
    oracle_day: int = -1
    last_epoch: int = 0

    @property
    def total_supply(self) -> int:
        return self.circulating + self.team_wallet

    @property
    def remaining_cap(self) -> int:
        return self.max_cap - self.total_supply

    def balance(self, holder: str) -> int:
        return self.wallets.get(holder, 0)

    def team_premium(self, user_amount: int) -> int:
        """Team mint that goes with a user mint of `user_amount`.

        4% of the user mint, clamped so that the team wallet stays within 4% of the
        total supply and the cap is not crossed.
        """

        nominal = user_amount * TEAM_PREMIUM_PERCENT // 100
        # team <= 4% of (circulating + team)  <=>  24 * team <= circulating
        share_room = (self.circulating + user_amount) // 24 - self.team_wallet
        cap_room = self.remaining_cap - user_amount
        return max(0, min(nominal, share_room, cap_room))

    def mint(self, day: int, amount: int, kind: str, holder: str = TEAM_ACCOUNT) -> MintRecord:
        if amount <= 0:
            raise DomainError(f"mint amount must be > 0, got {amount}")
        if amount > self.remaining_cap:
            raise CapExceededError(
                f"minting {amount} exceeds the remaining cap {self.remaining_cap}"
            )

        record = MintRecord(day=day, amount=amount, kind=kind, holder=holder)
        self._apply(record)
        self.mint_history.append(record)
        return record

    def _apply(self, record: MintRecord) -> None:
        if record.kind == "team":
            self.team_wallet += record.amount
            return
        self.circulating += record.amount
        self.wallets[record.holder] = self.balance(record.holder) + record.amount
        if record.kind == "user":
            self.cumulative_user_mints += record.amount

    def debit(self, holder: str, amount: int) -> None:
        """Move tokens out of a wallet into the pool (still circulating)."""
        if self.balance(holder) < amount:
            raise StateError(f"{holder} holds {self.balance(holder)}, cannot pay {amount}")
        self.wallets[holder] -= amount

    def credit(self, holder: str, amount: int) -> None:
        self.wallets[holder] = self.balance(holder) + amount

    @property
    def horizon(self) -> int:
        if self.vesting_horizon is not None:
            return self.vesting_horizon
        return self.max_cap * 100 // (100 + TEAM_PREMIUM_PERCENT)

    def vested_team(self) -> int:
        """Team tokens vested in proportion to the cumulative user minting."""
        minted = min(self.cumulative_user_mints, self.horizon)
        return self.team_wallet * minted // self.horizon

    @classmethod
    def replay(cls, history: list[MintRecord], max_cap: int = MAX_CAP) -> "SupplyLedger":
        """Ledger rebuilt from a mint history alone."""

        ledger = cls(max_cap=max_cap)
        for record in history:
            ledger._apply(record)
            ledger.mint_history.append(record)
        return ledger

    def replays_exactly(self) -> bool:
        rebuilt = self.replay(self.mint_history, self.max_cap)
        return (
            rebuilt.circulating == self.circulating
            and rebuilt.team_wallet == self.team_wallet
            and rebuilt.cumulative_user_mints == self.cumulative_user_mints
        )
