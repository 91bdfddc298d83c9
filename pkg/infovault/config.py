"""Run configuration: YAML documents validated into pydantic models."""

import os
from pathlib import Path
from typing import Literal

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError, field_validator

from infovault.data_model import MarketParams, Regime
from infovault.exceptions import ConfigError
from infovault.tokenomics.scenario import ScenarioScript

load_dotenv()

DEFAULT_SEED = 20230601
OUTPUT_DIR_VARIABLE = "INFOVAULT_OUTPUT_DIR"

Command = Literal["equilibrium", "convergence", "tokenomics"]


class EquilibriumConfig(BaseModel):
    """Equilibria of every requested regime at the base market and at each extra size pair."""

    market: MarketParams = MarketParams()
    regimes: list[Regime] = [Regime.NAIVE, Regime.REE, Regime.FULLY_REVEALING]
    sizes: list[tuple[float, float]] = []
    tol: float = 1e-10
    max_iter: int = 10_000
    check_multiplicity: bool = False

    @field_validator("regimes")
    def regimes_must_not_be_empty(cls, v):
        if not v:
            raise ValueError("at least one regime is required")
        return v

    @field_validator("sizes")
    def sizes_must_have_traders(cls, v):
        for n, m in v:
            if n < 0 or m < 0 or n + m <= 0:
                raise ValueError(f"size ({n}, {m}) needs N, M >= 0 and N + M > 0")
        return v

    @field_validator("tol")
    def tol_must_be_positive(cls, v):
        if not v > 0:
            raise ValueError("tol must be > 0")
        return v


def uninformed_sweep(n_informed: float = 10.0, exponents: range = range(1, 8)) -> list[tuple[float, float]]:
    """Grid with fixed N and M = 10, 100, ..."""
    return [(n_informed, float(10**k)) for k in exponents]


class ConvergenceConfig(BaseModel):
    """Monte Carlo study over a grid of (N, M); `tolerance` bounds the last row's price gap."""

    market: MarketParams = MarketParams()
    regime: Regime = Regime.NAIVE
    grid: list[tuple[float, float]] = uninformed_sweep()
    replications: int = 1000
    tolerance: float = 1e-4

    @field_validator("grid")
    def grid_cells_must_have_traders(cls, v):
        if not v:
            raise ValueError("grid must not be empty")
        for n, m in v:
            if n < 0 or m < 0 or n + m <= 0:
                raise ValueError(f"grid cell ({n}, {m}) needs N, M >= 0 and N + M > 0")
        return v

    @field_validator("replications")
    def replications_must_be_positive(cls, v):
        if v < 1:
            raise ValueError("replications must be >= 1")
        return v


CONFIG_MODELS = {
    "equilibrium": EquilibriumConfig,
    "convergence": ConvergenceConfig,
    "tokenomics": ScenarioScript,
}


class RunConfig(BaseModel):
    command: Command
    config_path: Path | None = None
    out: Path
    seed: int = DEFAULT_SEED
    format: Literal["csv", "jsonl"] = "csv"
    verbose: bool = False
    progress: bool = False


def _field_errors(e: ValidationError) -> list[tuple[str, str]]:
    return [(".".join(str(part) for part in err["loc"]) or "<root>", err["msg"]) for err in e.errors()]


def parse_config(document: dict | None, command: Command):
    """Validate a parsed document for `command`, reporting every field error."""

    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError([("<root>", "configuration must be a mapping")])
    try:
        return CONFIG_MODELS[command].model_validate(document)
    except ValidationError as e:
        raise ConfigError(_field_errors(e)) from e


def load_config(path: Path | str, command: Command):
    """Read and validate a YAML configuration. A missing file raises FileNotFoundError."""

    with open(path) as f:
        text = f.read()
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([("<document>", str(e))]) from e
    return parse_config(document, command)


def dump_default_config(command: Command) -> str:
    """Fully defaulted YAML document for `command`; loading it back gives the same parameters."""

    defaults = CONFIG_MODELS[command]().model_dump(mode="json")
    return yaml.safe_dump(defaults, sort_keys=False)


def resolve_output(out: Path) -> Path:
    """Relative output paths go under INFOVAULT_OUTPUT_DIR when it is set."""

    base = os.getenv(OUTPUT_DIR_VARIABLE)
    if base and not out.is_absolute():
        return Path(base) / out
    return out
