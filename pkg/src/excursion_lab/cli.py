"""Config-driven runner for the experiment catalog.

``excursion-lab run experiments.ini`` executes every section of the
config and writes ``report.csv``; ``excursion-lab list`` prints the
catalog.  Each section names one experiment::

    [long-excursions]
    experiment = E5
    seed = 20260816
    family = uniform
    n_ladder = 25, 50, 100, 200

Shared keys can sit in ``[DEFAULT]``.  Exit status: 0 when every check
passes, 1 when any check fails (or a sampler gives up), 2 on a config
problem.  A run's output depends only on its config, so re-running the
same file reproduces ``report.csv`` byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

from .levy import SamplingFailure
from .verify import (
    EXPERIMENTS,
    ExperimentConfig,
    reports_to_csv,
    run_experiment,
)

__all__ = ["main", "parse_config", "execute_config", "ConfigError"]

_REQUIRED_KEYS = ("experiment", "seed")
_KNOWN_KEYS = frozenset({
    "experiment", "seed", "lambda", "alpha", "family", "n_ladder",
    "replications", "eps", "dt", "workers", "out_dir", "plots",
})


class ConfigError(Exception):
    """The config file cannot be turned into experiment runs."""


def _default_workers():
    return os.cpu_count() or 1


def _build_config(section, kv) -> tuple[ExperimentConfig, bool]:
    for key in kv:
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"section [{section}] has unknown key "
                              f"{key!r}")
    for key in _REQUIRED_KEYS:
        if key not in kv:
            raise ConfigError(f"section [{section}] is missing required "
                              f"key {key!r}")
    try:
        kwargs = {"experiment": kv["experiment"], "seed": int(kv["seed"])}
        if "lambda" in kv:
            kwargs["lam"] = float(kv["lambda"])
        if "alpha" in kv:
            kwargs["alpha"] = float(kv["alpha"])
        if "family" in kv:
            kwargs["family"] = kv["family"]
        if "n_ladder" in kv:
            kwargs["n_ladder"] = tuple(
                int(part) for part in kv["n_ladder"].split(","))
        if "replications" in kv:
            kwargs["replications"] = int(kv["replications"])
        if "eps" in kv:
            kwargs["eps"] = float(kv["eps"])
        if "dt" in kv:
            kwargs["dt"] = float(kv["dt"])
        kwargs["workers"] = (int(kv["workers"]) if "workers" in kv
                             else _default_workers())
        if "out_dir" in kv:
            kwargs["out_dir"] = kv["out_dir"]
        cfg = ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"section [{section}]: {exc}") from exc
    plots = kv.get("plots", "false").strip().lower() in ("1", "true",
                                                         "yes", "on")
    return cfg, plots


def parse_config(path) -> list[tuple[str, ExperimentConfig, bool]]:
    """Read an INI file into ``(section, config, want_plots)`` triples."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from exc
    if not cp.sections():
        raise ConfigError(f"config {path!r} defines no experiment sections")
    return [(name, *(_build_config(name, dict(cp[name]))))
            for name in cp.sections()]


def _write_plot_data(out_dir, section, collected):
    for name, values in collected.items():
        fname = os.path.join(out_dir, f"{section}-{name}.csv")
        with open(fname, "w", encoding="utf-8") as fh:
            fh.write("sample\n")
            for v in values:
                fh.write(f"{float(v)!r}\n")


def execute_config(path, stdout=None, stderr=None) -> int:
    """Run every section of the config at ``path``; returns the exit code."""
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    try:
        runs = parse_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return 2

    reports = []
    failed = False
    out_dir = runs[0][1].out_dir
    os.makedirs(out_dir, exist_ok=True)
    for section, cfg, plots in runs:
        collect = {} if plots else None
        try:
            rows = run_experiment(cfg.experiment, cfg, collect=collect)
        except SamplingFailure as exc:
            print(f"[{section}] sampler gave up: {exc}", file=stderr)
            failed = True
            continue
        reports.extend(rows)
        good = sum(r.passed for r in rows)
        print(f"{section} ({cfg.experiment}): {good}/{len(rows)} checks "
              f"passed", file=stdout)
        failed = failed or good < len(rows)
        if collect:
            _write_plot_data(out_dir, section, collect)

    report_path = os.path.join(out_dir, "report.csv")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(reports_to_csv(reports))
    print(f"wrote {report_path}", file=stdout)
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="excursion-lab",
        description="run the simulation cross-check experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute every section of a config")
    run_p.add_argument("config", help="INI file of experiment sections")
    sub.add_parser("list", help="print the experiment catalog")
    args = parser.parse_args(argv)

    if args.command == "list":
        for eid, (_, desc) in sorted(EXPERIMENTS.items()):
            print(f"{eid}  {desc}")
        return 0
    return execute_config(args.config)
