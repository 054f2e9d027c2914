#!/usr/bin/env python3
"""
Command line interface for epiflux studies.

Every subcommand reads a JSON config, applies flag and environment overrides,
runs one study and writes its artifacts into the output directory.

Exit codes: 0 success, 2 config error, 3 runtime error, 4 statistical gate failure.
"""

import argparse
import sys
from pathlib import Path
from typing import Any

from epiflux.adapters.filesystem_store import FilesystemStore
from epiflux.adapters.structlog_telemetry import StructlogTelemetry, configure_logging
from epiflux.config import (
    SUBCOMMANDS,
    RunConfig,
    apply_overrides,
    log_level,
    parse_config,
)
from epiflux.exceptions import ConfigError, EpifluxError
from epiflux.studies import StudyOutcome, run_study

EXIT_OK = 0
EXIT_RUNTIME = 3
DEFAULT_OUT = 'epiflux-out'


def load_config(args: argparse.Namespace) -> RunConfig:
    """Read the config file and layer environment and flag values over it."""
    path = Path(args.config)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f'Cannot read config file {path}: {exc.strerror or exc}') from exc
    config = parse_config(text)
    overrides: dict[str, Any] = {
        'study': SUBCOMMANDS[args.command],
        'seed': args.seed,
        'out': args.out,
        'threads': args.threads,
    }
    return apply_overrides(config, overrides)


def write_error(out: str, record: dict[str, Any]) -> None:
    """Best-effort machine-readable error record; never masks the original failure."""
    try:
        FilesystemStore(out).write_json('error.json', record)
    except OSError:
        print(f'⚠️ Could not write error.json into {out}', file=sys.stderr)


def _runtime_record(exc: BaseException) -> dict[str, Any]:
    return {'error_type': type(exc).__name__, 'message': str(exc), 'exit_code': EXIT_RUNTIME}


def _print_outcome(outcome: StudyOutcome, location: str) -> None:
    print(f'✅ {outcome.kind.value} study finished, artifacts in {location}')
    for failure in outcome.gate_failures:
        print(f'   ⚠️ gate: {failure}')


def cmd_study(args: argparse.Namespace) -> int:
    """Run the study selected by the subcommand."""
    try:
        config = load_config(args)
    except ConfigError as exc:
        print(f'❌ {exc}', file=sys.stderr)
        write_error(args.out or DEFAULT_OUT, exc.to_record())
        return exc.exit_code

    store = FilesystemStore(config.out)
    telemetry = StructlogTelemetry().bind(study=config.study.value, seed=config.seed)
    try:
        outcome = run_study(config, store=store, telemetry=telemetry, gate=args.gate)
    except EpifluxError as exc:
        print(f'❌ {exc}', file=sys.stderr)
        write_error(config.out, exc.to_record())
        return exc.exit_code
    except OSError as exc:
        print(f'❌ I/O failure: {exc}', file=sys.stderr)
        write_error(config.out, _runtime_record(exc))
        return EXIT_RUNTIME
    except Exception as exc:
        print(f'❌ Unexpected error: {type(exc).__name__}: {exc}', file=sys.stderr)
        telemetry.record_error(f'study.{config.study.value}.crash', exc)
        write_error(config.out, _runtime_record(exc))
        return EXIT_RUNTIME

    _print_outcome(outcome, store.location())
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', '-c', required=True, help='JSON config file')
    parser.add_argument('--seed', type=int, help='Master seed (unsigned 64-bit)')
    parser.add_argument('--out', '-o', help=f'Output directory (default: {DEFAULT_OUT})')
    parser.add_argument('--threads', type=int, help='Worker processes for ensembles')
    parser.add_argument(
        '--gate', action='store_true', help='Exit with status 4 when a statistical gate fails'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='epiflux',
        description='Exact simulation and limit-theorem checks for the forced SIR model',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s simulate --config forced.json --out run1          # one realisation + ODE
  %(prog)s ode --config forced.json                          # mean-field ODE only
  %(prog)s ensemble --config forced.json --threads 8         # sup deviation vs N
  %(prog)s fluctuation --config forced.json --gate           # normality of W_N
  %(prog)s scaling --config forced.json --seed 7 --gate      # 1/sqrt(N) regression
        """,
    )
    parser.add_argument(
        '--log-level', help='Log level (default: $EPIFLUX_LOG_LEVEL or WARNING)'
    )

    subparsers = parser.add_subparsers(dest='command', help='Available studies')

    helps = {
        'simulate': 'Simulate one realisation and write its event log and grid',
        'ode': 'Integrate the mean-field ODE',
        'ensemble': 'Sup-norm deviation of many realisations from the ODE',
        'fluctuation': 'Normality of the fluctuation process against its limit covariance',
        'scaling': 'Regression of the relative spread of infectives on N',
    }
    for name, help_text in helps.items():
        sub = subparsers.add_parser(name, help=help_text)
        _add_common_flags(sub)
        sub.set_defaults(func=cmd_study)

    return parser


def main(argv: list[str] | None = None) -> None:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    configure_logging(log_level(args.log_level))
    try:
        code = args.func(args)
    except KeyboardInterrupt:
        print('\n🛑 Operation cancelled')
        code = 1
    sys.exit(code)


if __name__ == '__main__':
    main()
