import argparse
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from app import __version__
from app.models import ConfigError
from app.services import experiment_runner, load_config

load_dotenv()


def _report_state(state) -> None:
    if state.errors:
        print("❌ Errors:")
        for error in state.errors:
            print(f"   - {error}")
    if state.result is not None:
        for check in state.result.checks:
            mark = "✅" if check.passed else ("⚠️" if check.passed is None else "❌")
            print(f"   {mark} {check.name}: {check.value} (threshold {check.threshold})")


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="levytree-lab", description="Lévy Tree Laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run an experiment config")
    run.add_argument("config", help="Path to a YAML experiment config")
    run.add_argument("overrides", nargs="*", help="section.key=value overrides")
    run.add_argument("--strict", action="store_true", help="Exit with 1 when a check fails")

    validate = commands.add_parser("validate", help="Validate a config without running it")
    validate.add_argument("config", help="Path to a YAML experiment config")
    validate.add_argument("overrides", nargs="*", help="section.key=value overrides")

    commands.add_parser("list-experiments", help="List registered experiments")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        print("Available experiments:")
        for name, description in experiment_runner.list_experiments():
            print(f"  - {name}: {description}")
        return 0

    try:
        config = load_config(args.config, args.overrides)
    except (ConfigError, ValidationError) as e:
        print(f"❌ Config invalid: {e}")
        return 2

    if args.command == "validate":
        print(f"✅ Config valid: {config.experiment} on a {config.mechanism.kind} mechanism")
        return 0

    exit_code, state = experiment_runner.run_experiment(config, strict=args.strict)
    _report_state(state)
    if state.manifest is not None:
        print("\n" + "=" * 50)
        print(f"🎉 {config.experiment.upper()} COMPLETE (exit {exit_code})")
        print(f"📊 Artifacts: {len(state.manifest.files)} files under {os.path.abspath(state.output_dir)}")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
