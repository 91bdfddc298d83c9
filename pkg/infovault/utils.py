import hashlib
import json
from decimal import Decimal, ROUND_DOWN

# Token and money amounts are integers in micro-units (6 decimals)
MICRO = 1_000_000


def to_micro(amount: float | int | str) -> int:
    """Convert a whole-unit amount into integer micro-units, rounding toward zero."""

    scaled = Decimal(str(amount)) * MICRO
    return int(scaled.to_integral_value(rounding=ROUND_DOWN))


def from_micro(amount: int) -> float:
    """Convert micro-units back to whole units."""
    return amount / MICRO


def state_hash(state: dict) -> str:
    """Stable digest of a JSON-serializable state snapshot."""

    canonical = json.dumps(state, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
