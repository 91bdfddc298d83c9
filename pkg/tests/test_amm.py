import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from infovault.exceptions import DomainError, DustError, PoolPausedError, StateError
from infovault.tokenomics.amm import (
    SAFEGUARD_THRESHOLD,
    SAFEGUARD_WINDOW_DAYS,
    Direction,
    PoolState,
    add_liquidity,
    amm_swap,
    release_pause,
    remove_liquidity,
    safeguard_check,
    window_max,
)
from infovault.utils import MICRO


def seeded_pool(token: int = 1_000 * MICRO, quote: int = 1_000 * MICRO, fee: float = 0.0) -> PoolState:
    pool = PoolState(swap_fee=fee)
    add_liquidity(pool, "founder", token, quote)
    return pool


def test_symmetric_swap_without_fee_halves_the_input():
    pool = seeded_pool()
    assert amm_swap(pool, 1_000 * MICRO, Direction.TOKEN_TO_QUOTE) == 500 * MICRO
    assert pool.reserve_token == 2_000 * MICRO
    assert pool.reserve_quote == 500 * MICRO


def test_fee_lowers_output_and_grows_k():
    free, charged = seeded_pool(), seeded_pool(fee=0.0003)
    k_before = charged.k
    out_free = amm_swap(free, 10 * MICRO, Direction.QUOTE_TO_TOKEN)
    out_charged = amm_swap(charged, 10 * MICRO, Direction.QUOTE_TO_TOKEN)
    assert out_charged < out_free
    assert charged.k > k_before


def test_swap_output_formula():
    pool = seeded_pool(fee=0.0003)
    amount = 37 * MICRO
    expected = (1_000 * MICRO) * amount * 9_997 // ((1_000 * MICRO) * 10_000 + amount * 9_997)
    assert amm_swap(pool, amount, Direction.TOKEN_TO_QUOTE) == expected


def test_swap_refusals():
    pool = seeded_pool()
    with pytest.raises(DomainError):
        amm_swap(pool, 0, Direction.TOKEN_TO_QUOTE)
    with pytest.raises(StateError):
        amm_swap(PoolState(), 10, Direction.TOKEN_TO_QUOTE)

    pool.paused, pool.pause_reason = True, "test"
    with pytest.raises(PoolPausedError):
        amm_swap(pool, 10, Direction.TOKEN_TO_QUOTE)


def test_dust_swap_is_refused():
    pool = seeded_pool(token=10**12, quote=1)
    with pytest.raises(DustError):
        amm_swap(pool, 1, Direction.TOKEN_TO_QUOTE)
    assert pool.reserve_token == 10**12


def test_liquidity_shares():
    pool = PoolState()
    shares, _, _ = add_liquidity(pool, "founder", 100 * MICRO, 400 * MICRO)
    assert shares == math.isqrt(100 * MICRO * 400 * MICRO)

    # unbalanced deposit: only the matching quote is taken
    more, token_used, quote_used = add_liquidity(pool, "alice", 50 * MICRO, 500 * MICRO)
    assert more == shares // 2
    assert token_used == 50 * MICRO
    assert quote_used == 200 * MICRO
    assert sum(pool.lp_shares.values()) == pool.total_shares


def test_remove_liquidity_is_pro_rata():
    pool = PoolState()
    add_liquidity(pool, "founder", 100 * MICRO, 100 * MICRO)
    shares, _, _ = add_liquidity(pool, "alice", 100 * MICRO, 100 * MICRO)
    token, quote = remove_liquidity(pool, "alice", shares)
    assert (token, quote) == (100 * MICRO, 100 * MICRO)
    assert "alice" not in pool.lp_shares

    with pytest.raises(StateError):
        remove_liquidity(pool, "founder", pool.total_shares)
    with pytest.raises(StateError):
        remove_liquidity(pool, "bob", 1)


@pytest.mark.property
@given(
    swaps=st.lists(
        st.tuples(st.sampled_from(list(Direction)), st.integers(min_value=1, max_value=10**9)),
        max_size=30,
    ),
    fee=st.sampled_from([0.0, 0.0003, 0.003, 0.01]),
)
def test_k_never_decreases(swaps, fee):
    pool = seeded_pool(fee=fee)
    for direction, amount in swaps:
        k_before = pool.k
        try:
            amm_swap(pool, amount, direction)
        except DustError:
            continue
        assert pool.k >= k_before
        assert pool.live


############################### Safeguard ###############################


def with_history(prices: list[float]) -> PoolState:
    pool = PoolState()
    pool.spot_price_history = list(enumerate(prices))
    return pool


def test_drop_to_exactly_seventy_percent_does_not_pause():
    pool = with_history([1.0, 0.9, 0.70])
    assert not safeguard_check(pool, 2)


def test_drop_below_seventy_percent_pauses():
    pool = with_history([1.0, 0.9, 0.69])
    assert safeguard_check(pool, 2)
    assert "0.69" in pool.pause_reason


def test_old_highs_leave_the_window():
    prices = [1.0] + [0.6] * 7
    pool = with_history(prices)
    # days 1..7 only: the 1.0 of day 0 has left the seven day window
    assert not safeguard_check(pool, 7)
    assert safeguard_check(pool, 6)


def test_auto_mode_lifts_pause_and_manual_mode_holds_it():
    auto = with_history([1.0, 0.5, 0.5])
    assert safeguard_check(auto, 1)
    assert not safeguard_check(auto, 2, window=1)

    manual = with_history([1.0, 0.5, 0.5])
    assert safeguard_check(manual, 1, mode="manual")
    assert safeguard_check(manual, 2, window=1, mode="manual")
    release_pause(manual)
    assert not manual.paused


def test_safeguard_needs_a_price():
    with pytest.raises(StateError):
        safeguard_check(PoolState(), 0)


def test_window_max_ignores_future_days():
    history = [(0, 1.0), (3, 2.0), (5, 9.0)]
    assert window_max(history, 4, 7) == 2.0
    assert window_max(history, 4, 1) is None


@pytest.mark.property
@given(
    prices=st.lists(st.floats(min_value=0.01, max_value=100, allow_nan=False), min_size=1, max_size=40),
    window=st.integers(min_value=1, max_value=10),
    threshold=st.floats(min_value=0.1, max_value=0.95),
)
def test_safeguard_matches_brute_force(prices, window, threshold):
    pool = with_history(prices)
    for day, price in enumerate(prices):
        high = max(prices[max(0, day - window + 1) : day + 1])
        assert safeguard_check(pool, day, window, threshold) == (price < threshold * high)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_safeguard_follows_long_random_walks(seed):
    rng = np.random.default_rng(seed)
    prices = np.exp(np.cumsum(rng.normal(0.0, 0.1, size=100_000))).tolist()

    pool = PoolState()
    pauses = 0
    for day, price in enumerate(prices):
        pool.spot_price_history.append((day, price))
        high = max(prices[max(0, day - SAFEGUARD_WINDOW_DAYS + 1) : day + 1])
        expected = price < SAFEGUARD_THRESHOLD * high
        assert safeguard_check(pool, day) == expected
        pauses += expected
    assert pauses > 0
