#!/usr/bin/env python3
"""
Configuration management functions for the kgpart CLI.

This module contains functions for displaying and modifying the
engine configuration.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click

from .colors import Colors
from .config import EngineConfig

DEFAULT_CONFIG_FILE = Path("kgpart.json")

SETTING_LABELS = {
    "k": "Shard count",
    "linkage": "Linkage",
    "cut_d": "Dendrogram cut distance",
    "balance_tolerance": "Balance tolerance",
    "threshold": "Adaptation threshold",
    "seed": "Seed",
    "join_term": "Join term",
    "gate_metric": "Gate metric",
    "max_hops": "Max hops",
    "snapshot_interval": "Snapshot interval",
    "threshold_trigger": "Threshold trigger",
    "endpoint_template": "Endpoint template",
}


def update_config_settings(config: EngineConfig, **overrides: Any) -> Tuple[EngineConfig, bool]:
    """Apply every non-None override and show what changed.

    Returns the updated config and whether anything changed.
    """
    changes: Dict[str, Any] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        current = getattr(config, key)
        if getattr(current, "value", current) == getattr(value, "value", value):
            continue
        changes[key] = value

    updated = config.with_overrides(**changes)
    for key in changes:
        value = getattr(updated, key)
        label = SETTING_LABELS.get(key, key)
        click.echo(f"{Colors.GREEN}✓ {label} set to: {getattr(value, 'value', value)}{Colors.RESET}")
    return updated, bool(changes)


def show_config_display(config: EngineConfig, config_file: Optional[Path] = None) -> None:
    """Show the effective configuration."""
    click.echo(f"{Colors.BOLD}kgpart configuration:{Colors.RESET}")
    if config_file is not None:
        state = "" if config_file.exists() else f" {Colors.YELLOW}(not created yet){Colors.RESET}"
        click.echo(f"Config file: {config_file}{state}")
    click.echo()

    data = config.to_dict()
    for key, label in SETTING_LABELS.items():
        click.echo(f"{label}: {data[key]}")

    weights = ", ".join(f"{name}={value:g}" for name, value in data["weights"].items())
    click.echo(f"Score weights: {weights}")
    cost = data["cost"]
    click.echo(f"Cost model: alpha={cost['alpha']:g} beta={cost['beta']:g} gamma={cost['gamma']:g}")

    if config_file is not None and config_file.exists():
        click.echo(f"Config file size: {config_file.stat().st_size} bytes")
