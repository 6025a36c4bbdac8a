"""Command-line entry point: channel analysis, simulation, ingestion, serving.

Every run prints the resolved configuration (including the master seed) to
stderr; results go to stdout or to --out files written atomically. Failures
print one machine-readable JSON error line to stderr and exit nonzero.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .channel import (
    channel_from_dict,
    compute_capacity,
    make_symmetric_channel,
)
from .errors import PreflearnError
from .service import DATA_DIR_ENV, ElicitationService, make_server
from .simulation import ExperimentConfig, run_experiment

try:
    import tomllib  # py311+
except ImportError:  # pragma: no cover - py310 fallback
    import tomli as tomllib


def _fail(code: str, message: str, exit_code: int = 1):
    click.echo(json.dumps({"error": {"code": code, "message": message}}), err=True)
    sys.exit(exit_code)


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        _fail("config_not_found", f"config file {path} does not exist")
    if p.suffix.lower() == ".toml":
        with open(p, "rb") as handle:
            return tomllib.load(handle)
    with open(p, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _echo_resolved(config: dict) -> None:
    click.echo("resolved config: " + json.dumps(config, sort_keys=True), err=True)


@click.group()
def main():
    """Adaptive choice-based preference elicitation toolkit."""


@main.command("analyze-channel")
@click.option("--channel", "channel_file", type=str, default=None,
              help="Channel spec file (JSON: matrix or symmetric).")
@click.option("--symmetric", "symmetric", type=str, default=None,
              help="Shortcut 'm,alpha' for a symmetric channel.")
@click.option("--tol", type=float, default=1e-9, show_default=True)
def analyze_channel(channel_file, symmetric, tol):
    """Capacity, optimal input, admissibility, and KKT residuals as JSON."""
    try:
        if (channel_file is None) == (symmetric is None):
            _fail("usage", "provide exactly one of --channel or --symmetric", 2)
        if symmetric is not None:
            m_text, alpha_text = symmetric.split(",")
            channel = make_symmetric_channel(int(m_text), float(alpha_text))
            spec = {"symmetric": {"m": int(m_text), "alpha": float(alpha_text)}}
        else:
            spec = _load_config_file(channel_file)
            channel = channel_from_dict(spec)
        _echo_resolved({"channel": spec, "tol": tol})
        analysis = compute_capacity(channel, tol=tol)
        residuals = [
            r if np.isfinite(r) else None for r in analysis.kkt_residuals.tolist()
        ]
        click.echo(
            json.dumps(
                {
                    "m": channel.m,
                    "capacity_bits": analysis.capacity_bits,
                    "optimal_u": analysis.optimal_u.weights.tolist(),
                    "admissible": analysis.admissible,
                    "kappa_min": analysis.kappa_min,
                    "kappa_max": analysis.kappa_max,
                    "kkt_residuals": residuals,
                    "iterations": analysis.iterations,
                },
                sort_keys=True,
            )
        )
    except PreflearnError as exc:
        _fail(type(exc).__name__, str(exc))


@main.command("simulate")
@click.option("--config", "config_file", type=str, required=True,
              help="Experiment config (JSON or TOML).")
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--seed", type=int, default=None, help="Override master seed.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker processes for sample paths.")
@click.option("--timing/--no-timing", default=False, show_default=True,
              help="Record wall-clock decision times (makes outputs non-reproducible).")
def simulate(config_file, out_dir, seed, threads, timing):
    """Run the simulated-user experiment and write metrics.csv + summary.json."""
    try:
        spec = _load_config_file(config_file)
        if seed is not None:
            spec["master_seed"] = seed
        if timing:
            spec["record_timing"] = True
        config = ExperimentConfig.from_dict(spec)
        _echo_resolved(config.to_dict())
        run_experiment(config, out_dir=out_dir, workers=max(1, threads))
        click.echo(json.dumps({"out": out_dir, "paths": config.paths}))
    except PreflearnError as exc:
        _fail(type(exc).__name__, str(exc))


@main.command("ingest")
@click.option("--file", "catalog_file", type=str, required=True)
@click.option("--data", "data_dir", type=str, default=None,
              help=f"Data directory (default ${DATA_DIR_ENV} or ./preflearn-data).")
def ingest(catalog_file, data_dir):
    """Validate a JSON Lines catalog and store it content-addressed."""
    try:
        data_dir = data_dir or os.environ.get(DATA_DIR_ENV, "./preflearn-data")
        _echo_resolved({"file": catalog_file, "data": data_dir})
        path = Path(catalog_file)
        if not path.exists():
            _fail("config_not_found", f"catalog file {catalog_file} does not exist")
        service = ElicitationService(data_dir)
        result = service.ingest_catalog(path.read_text(encoding="utf-8"))
        click.echo(json.dumps(result, sort_keys=True))
    except PreflearnError as exc:
        _fail(type(exc).__name__, str(exc))


@main.command("serve")
@click.option("--addr", type=str, default="127.0.0.1:8572", show_default=True)
@click.option("--data", "data_dir", type=str, default=None)
@click.option("--ui", "ui_dir", type=str, default=None,
              help="Directory of static frontend assets to serve at /.")
def serve(addr, data_dir, ui_dir):
    """Serve the live elicitation HTTP API."""
    try:
        data_dir = data_dir or os.environ.get(DATA_DIR_ENV, "./preflearn-data")
        _echo_resolved({"addr": addr, "data": data_dir, "ui": ui_dir})
        server = make_server(addr, data_dir, ui_dir)
        click.echo(f"serving on http://{addr}", err=True)
        server.serve_forever()
    except PreflearnError as exc:
        _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    main()
