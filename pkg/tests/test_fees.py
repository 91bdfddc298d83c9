import math
from fractions import Fraction

import pytest
from pydantic import ValidationError

from infovault.tokenomics.fees import FeeSchedule, PerformanceTier, exact
from infovault.utils import MICRO


def test_exact_rates_are_decimal_fractions():
    assert exact(0.0003) == Fraction(3, 10_000)
    assert exact(0.05) == Fraction(1, 20)


@pytest.mark.parametrize(
    "monthly_return, rate",
    [
        (-0.1, 0.0),
        (0.0, 0.10),
        (0.05, 0.10),
        (math.nextafter(0.09, 0), 0.10),
        (0.09, 0.15),
        (0.19, 0.15),
        (math.nextafter(0.20, 0), 0.15),
        (0.20, 0.25),
        (0.50, 0.25),
        (3.0, 0.25),
    ],
)
def test_tier_brackets_are_left_closed(monthly_return, rate):
    assert FeeSchedule().tier_rate(monthly_return) == rate


def test_performance_fee_applies_to_whole_gain():
    fees = FeeSchedule()
    assert fees.performance_fee(1_000_000, 0.05) == 100_000
    assert fees.performance_fee(1_000_000, 0.25) == 250_000
    assert fees.performance_fee(-5, 0.05) == 0


def test_entry_fee():
    assert FeeSchedule().entry_fee_on(100 * MICRO) == 5 * MICRO
    assert FeeSchedule(entry_fee=0).entry_fee_on(100 * MICRO) == 0


def test_management_fee_carry_adds_up_over_a_year():
    fees = FeeSchedule()
    reserve = 1_234_567_891
    carry, total = Fraction(0), 0
    for _ in range(12):
        fee, carry = fees.management_fee(reserve, carry)
        total += fee
    assert total == reserve * 2 // 100


def test_schedule_rejects_bad_rates():
    with pytest.raises(ValidationError):
        FeeSchedule(swap_fee=1.0)
    with pytest.raises(ValidationError):
        FeeSchedule(entry_fee=-0.01)


@pytest.mark.parametrize(
    "tiers",
    [
        [],
        [PerformanceTier(lower=0.05, upper=None, rate=0.1)],
        [PerformanceTier(lower=0, upper=0.1, rate=0.1)],
        [
            PerformanceTier(lower=0, upper=0.1, rate=0.1),
            PerformanceTier(lower=0.2, upper=None, rate=0.2),
        ],
    ],
)
def test_schedule_rejects_broken_tiers(tiers):
    with pytest.raises(ValidationError):
        FeeSchedule(performance_tiers=tiers)


def test_schedule_survives_json_round_trip():
    fees = FeeSchedule()
    assert FeeSchedule.model_validate(fees.model_dump(mode="json")).model_dump() == fees.model_dump()
