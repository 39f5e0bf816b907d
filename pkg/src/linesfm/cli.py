"""Command-line entry point ``linesfm``.

Every config key has a long flag of the same name (``--sigma_des_sq`` or
``--sigma-des-sq``); values are parsed as YAML, so lists are written
``--sigma_des_sq "[0.1, 0.3]"``.  Flags override the config file.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 numerical abort.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from . import output
from .config import FIELD_NAMES, LOG_LEVELS, RunConfig, parse_config
from .errors import ConfigError, ScenarioError
from .sim import generate_scenario, monte_carlo, run

log = logging.getLogger("linesfm")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
RAW_STRING_KEYS = ("out", "log_level", "dof_mask", "compensation", "multiline_strategy")
BOOL_KEYS = ("plot_data", "figures")


def _parse_value(key: str, text: str):
    if key in RAW_STRING_KEYS and not text.lstrip().startswith("["):
        return text
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r}: {exc}", key) from exc


def _add_overrides(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config overrides")
    for key in FIELD_NAMES:
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        kw = dict(dest=f"ov_{key}", metavar="VALUE", default=None)
        if key in BOOL_KEYS:
            kw.update(nargs="?", const="true")
        g.add_argument(*flags, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linesfm",
        description="Active structure from motion for 3D lines: closed-loop simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "simulate one run and write CSV/JSON (and optionally figures)"),
        ("montecarlo", "simulate many independently seeded runs and summarise them"),
        ("validate", "check a config file against the schema"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="YAML or JSON config file")
        _add_overrides(p)
    return parser


def _overrides(args) -> dict:
    out = {}
    for key in FIELD_NAMES:
        v = getattr(args, f"ov_{key}")
        if v is not None:
            out[key] = _parse_value(key, v)
    return out


def _setup_logging() -> bool:
    env = os.environ.get("LINESFM_LOG")
    level = env.upper() if env and env.upper() in LOG_LEVELS else "INFO"
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    if env and env.upper() not in LOG_LEVELS:
        log.warning("LINESFM_LOG=%r not understood; using INFO", env)
    return bool(env)


def _cmd_run(cfg: RunConfig) -> int:
    try:
        scenario = generate_scenario(cfg)
    except (ScenarioError, ValueError) as exc:
        print(f"linesfm: cannot build scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rec = run(scenario)
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        output.write_timeseries(rec, out / "timeseries.csv")
        output.write_summary(rec, cfg, out / "summary.json")
        if cfg.plot_data:
            output.write_plot_data(rec, out / "plot_data")
        if cfg.figures:
            from . import report
            report.render_all(rec, out / "figures", cfg.sigma_des_sq)
    except OSError as exc:
        print(f"linesfm: cannot write output to {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    errs = ", ".join(f"{e:.3e}" for e in rec.final_error)
    log.info("final Plücker error per line: %s", errs)
    if rec.aborted:
        print(f"linesfm: run aborted: {rec.aborted}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_montecarlo(cfg: RunConfig) -> int:
    try:
        generate_scenario(cfg)
    except (ScenarioError, ValueError) as exc:
        print(f"linesfm: cannot build scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = monte_carlo(cfg)
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        output.write_montecarlo(result, cfg, out)
        if cfg.figures:
            from . import report
            report.plot_montecarlo(result, out / "final_errors.png")
    except OSError as exc:
        print(f"linesfm: cannot write output to {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    if result["failures"]:
        log.warning("%d of %d runs aborted", result["failures"], result["n_runs"])
    fe = result["final_error"]
    if fe["count"]:
        log.info("final error median %.3e (p10 %.3e, p90 %.3e)", fe["median"], fe["p10"], fe["p90"])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    env_level = _setup_logging()
    try:
        cfg = parse_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"linesfm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not env_level:
        logging.getLogger().setLevel(cfg.log_level)

    if args.command == "validate":
        print("config OK")
        return EXIT_OK
    if args.command == "run":
        return _cmd_run(cfg)
    return _cmd_montecarlo(cfg)


if __name__ == "__main__":
    sys.exit(main())
