"""Command-line front end: equilibrium tables, convergence studies and token economy runs.

    infovault <command> --config PATH --out PATH [--seed N] [--format csv|jsonl] [-v]
    infovault defaults <command>

Exit codes: 0 success, 1 IO failure, 2 invalid configuration, 3 numerical or simulation failure.
"""

import argparse
import json
import logging
import math
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from infovault import equilibrium, market_sim
from infovault.config import (
    DEFAULT_SEED,
    ConvergenceConfig,
    EquilibriumConfig,
    RunConfig,
    dump_default_config,
    load_config,
    parse_config,
    resolve_output,
)
from infovault.data_model import Regime
from infovault.exceptions import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InfovaultError,
    PolicyViolationError,
    StructuralError,
)
from infovault.tokenomics.economy import TokenEconomy
from infovault.tokenomics.scenario import ScenarioScript

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

EQUILIBRIUM_COLUMNS = [
    "regime",
    "n",
    "m",
    "price",
    "coeff_informed",
    "coeff_noise",
    "conditional_mean",
    "conditional_variance",
    "var_p",
    "ie",
    "residual",
    "flag",
]


def run_equilibrium(config: EquilibriumConfig, run: RunConfig) -> tuple[pd.DataFrame, str]:
    market = config.market
    sizes = [(market.n_informed, market.m_uninformed)] + list(config.sizes)

    rows = []
    for n, m in sizes:
        params = market.with_sizes(n, m)
        for regime in config.regimes:
            flag = ""
            if regime == Regime.REE:
                solution = equilibrium.solve(params, regime, tol=config.tol, max_iter=config.max_iter)
                if config.check_multiplicity and equilibrium.check_multiplicity(solution, params):
                    flag = "multiplicity"
            else:
                solution = equilibrium.solve(params, regime)

            if regime == Regime.FULLY_REVEALING:
                variance = equilibrium.fully_revealing_price_variance(params)
                var_p = variance.value
                if variance.negative_variance:
                    flag = "negative_variance"
            else:
                var_p = equilibrium.price_variance(params, solution)

            rows.append(
                {
                    "regime": regime.value,
                    "n": n,
                    "m": m,
                    "price": solution.price,
                    "coeff_informed": solution.coeff_informed,
                    "coeff_noise": solution.coeff_noise,
                    "conditional_mean": solution.conditional_mean,
                    "conditional_variance": solution.conditional_variance,
                    "var_p": var_p,
                    "ie": equilibrium.informational_efficiency(var_p) if var_p > 0 else math.nan,
                    "residual": solution.residual,
                    "flag": flag,
                }
            )

    table = pd.DataFrame(rows, columns=EQUILIBRIUM_COLUMNS)
    return table, f"equilibrium: {len(table)} rows over {len(sizes)} market sizes"


def run_convergence(config: ConvergenceConfig, run: RunConfig) -> tuple[pd.DataFrame, str]:
    table = market_sim.run_convergence_study(
        config.market,
        config.grid,
        config.replications,
        run.seed,
        config.regime,
        progress=run.progress,
    )
    last = table.iloc[-1]
    status = "within" if abs(last["price_gap"]) <= config.tolerance else "outside"
    summary = (
        f"convergence: {len(table)} cells x {config.replications} replications, "
        f"last gap {last['price_gap']:.3e} {status} tolerance {config.tolerance:g}"
    )
    return table, summary


def run_tokenomics(script: ScenarioScript, run: RunConfig) -> tuple[pd.DataFrame, str]:
    economy = TokenEconomy(script, seed=run.seed)
    table = economy.run(progress=run.progress)
    economy.write_events(events_path(resolve_output(run.out)))
    last = table.iloc[-1]
    summary = (
        f"tokenomics: {script.days} days, supply {last['supply']:,.6f}, "
        f"pledged {last['pledged_value']:,.6f}, {len(economy.events)} events"
    )
    return table, summary


RUNNERS = {
    "equilibrium": run_equilibrium,
    "convergence": run_convergence,
    "tokenomics": run_tokenomics,
}


def events_path(out: Path) -> Path:
    return out.with_name(out.name + ".events.jsonl")


def _native(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def write_table(table: pd.DataFrame, path: Path, format: str = "csv") -> None:
    """CSV with 12 significant digits, or one JSON object per row at full precision."""

    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        table.to_csv(path, index=False, float_format="%.12g")
        return
    with open(path, "w") as f:
        for record in table.to_dict(orient="records"):
            f.write(json.dumps({k: _native(v) for k, v in record.items()}) + "\n")


def run(config: RunConfig) -> int:
    """Run one command and write its table; returns the exit code."""

    logging.getLogger().setLevel(logging.DEBUG if config.verbose else logging.INFO)
    try:
        if config.config_path is None:
            params = parse_config({}, config.command)
        else:
            params = load_config(config.config_path, config.command)
        out = resolve_output(config.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        table, summary = RUNNERS[config.command](params, config)
        write_table(table, out, config.format)
    except (ConfigError, ValidationError, DomainError, PolicyViolationError) as e:
        logging.error(str(e))
        return EXIT_CONFIG
    except (ConvergenceError, StructuralError) as e:
        logging.error(f"numerical failure: {e}")
        return EXIT_NUMERICAL
    except InfovaultError as e:
        logging.error(f"simulation failure: {type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    except OSError as e:
        logging.error(f"IO failure: {e}")
        return EXIT_IO

    print(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infovault", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    for name in RUNNERS:
        sub = commands.add_parser(name, help=f"run the {name} command")
        sub.add_argument("--config", type=Path, default=None, help="YAML configuration")
        sub.add_argument("--out", type=Path, required=True, help="output table path")
        sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sub.add_argument("--format", choices=["csv", "jsonl"], default="csv")
        sub.add_argument("--no-progress", action="store_true", help="hide progress bars")
        sub.add_argument("-v", "--verbose", action="store_true")

    defaults = commands.add_parser("defaults", help="print a fully defaulted configuration")
    defaults.add_argument("target", choices=list(RUNNERS))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "defaults":
        print(dump_default_config(args.target), end="")
        return EXIT_OK

    logging.basicConfig(
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    config = RunConfig(
        command=args.command,
        config_path=args.config,
        out=args.out,
        seed=args.seed,
        format=args.format,
        verbose=args.verbose,
        progress=not args.no_progress,
    )
    return run(config)
