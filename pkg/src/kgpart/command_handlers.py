#!/usr/bin/env python3
"""
Command handlers for the kgpart CLI.

This module contains the Click command handler functions
that implement the main CLI commands.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import click

from .benchmark import SyntheticSpec, workload_jsonl, write_ntriples
from .clustering import build_distance_matrix, cluster_workload, dendrogram_to_json, distance_matrix_to_csv, group_summary
from .colors import Colors
from .config import ConfigStore, EngineConfig, load_config
from .config_management import DEFAULT_CONFIG_FILE, show_config_display, update_config_settings
from .core import EXPERIMENTS, PartitionEngine, comparison_csv
from .errors import InputError, KgPartError
from .federation import manifest_json, shard_sizes, simulate
from .kg_model import load_ntriples
from .status_display import show_adapt_result, show_cost_summary, show_partition_summary, show_query_table
from .workload import load_workload

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def exit_on_error(func: F) -> F:
    """Print engine errors in red and exit 2 for bad input, 1 otherwise"""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except InputError as e:
            click.echo(f"{Colors.RED}Error: {e}{Colors.RESET}", err=True)
            sys.exit(2)
        except KgPartError as e:
            click.echo(f"{Colors.RED}Error: {e}{Colors.RESET}", err=True)
            sys.exit(1)
        except Exception as e:
            logger.debug("Unexpected failure", exc_info=True)
            click.echo(f"{Colors.RED}Internal error: {e}{Colors.RESET}", err=True)
            sys.exit(1)

    return wrapper  # type: ignore[return-value]


def resolve_config(config_file: Optional[Path], **overrides: Any) -> EngineConfig:
    """Config file (or defaults) with the command-line flags on top"""
    return load_config(config_file).with_overrides(**overrides)


def _write(path: Path, text: str, what: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    click.echo(f"{Colors.GREEN}✓ {what} written to {path}{Colors.RESET}")


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}{suffix}")


def handle_generate_command(
    out: Path,
    universities: int,
    seed: int,
    workload_path: Optional[Path],
    with_extra: bool,
) -> None:
    """Handle the generate command logic"""
    spec = SyntheticSpec(universities=universities, seed=seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = write_ntriples(spec, out)
    click.echo(
        f"{Colors.GREEN}✓ Generated {count} triples for {universities} "
        f"universit{'y' if universities == 1 else 'ies'} (seed {seed}) in {out}{Colors.RESET}"
    )
    if workload_path is not None:
        _write(workload_path, workload_jsonl(with_extra), "Workload")


def handle_partition_command(
    data: Path,
    workload: Path,
    config: EngineConfig,
    out: Path,
    manifest: Optional[Path],
) -> None:
    """Handle the partition command logic"""
    engine = PartitionEngine(load_ntriples(data), load_workload(workload), config)
    partition = engine.build_partition()
    _write(out, partition.to_json(), "Partition")
    _write(manifest or _sibling(out, ".manifest.json"), manifest_json(engine.shards), "Shard manifest")
    click.echo()
    show_partition_summary(partition, shard_sizes(engine.shards), config.balance_tolerance)


def handle_run_command(
    data: Path,
    workload: Path,
    partition: Path,
    config: EngineConfig,
    out: Optional[Path],
    timings: Optional[Path],
) -> None:
    """Handle the run command logic"""
    engine = PartitionEngine.from_files(data, workload, config, partition)
    report = engine.run(record=True)
    if out is None:
        click.echo(report.to_csv(), nl=False)
    else:
        _write(out, report.to_csv(), "Cost report")
        show_cost_summary(report)
    if timings is not None:
        _write(timings, engine.workload.timing_csv(), "Timings")


def handle_adapt_command(
    data: Path,
    workload: Path,
    partition: Path,
    config: EngineConfig,
    out: Optional[Path],
    plan: Optional[Path],
    compare: Optional[Path],
) -> None:
    """Handle the adapt command logic"""
    engine = PartitionEngine.from_files(data, workload, config, partition)
    result = engine.adapt()
    show_adapt_result(result)
    click.echo()

    target = out or partition
    _write(plan or _sibling(target, ".plan.json"), result.plan.to_json(), "Migration plan")
    adaptive = result.report_after if result.committed else result.report_before
    _write(
        compare or _sibling(target, ".compare.csv"),
        comparison_csv(result.report_before, adaptive),  # type: ignore[arg-type]
        "Comparison",
    )

    if result.committed:
        current, shards = engine.current()
        _write(target, current.to_json(), f"Partition v{current.version}")
        _write(_sibling(target, ".manifest.json"), manifest_json(shards), "Shard manifest")
    else:
        click.echo(f"{Colors.YELLOW}⚠ Partition file left unchanged{Colors.RESET}")


def handle_report_command(
    data: Path,
    workload: Path,
    partition: Path,
    config: EngineConfig,
    out: Optional[Path],
    dendrogram: Optional[Path],
    distances: Optional[Path],
) -> None:
    """Handle the report command logic"""
    engine = PartitionEngine.from_files(data, workload, config, partition)
    current, shards = engine.current()
    show_partition_summary(current, shard_sizes(shards), config.balance_tolerance)
    click.echo()

    report = simulate(engine.graph, engine.workload, current, config.cost)
    show_cost_summary(report)
    click.echo()

    tree, groups = cluster_workload(engine.workload, config.linkage, config.cut_d)
    click.echo(f"{Colors.BOLD}Feature groups at d={config.cut_d}{Colors.RESET}")
    show_query_table(
        {str(gid): (queries, features) for gid, queries, features in group_summary(groups)},
        ("group", "queries", "features"),
    )

    if out is not None:
        _write(out, report.to_csv(), "Cost report")
    if dendrogram is not None:
        _write(dendrogram, dendrogram_to_json(tree), "Dendrogram")
    if distances is not None:
        _write(distances, distance_matrix_to_csv(build_distance_matrix(engine.workload)), "Distance matrix")


def handle_config_command(config_file: Optional[Path], set_mode: bool, **overrides: Any) -> None:
    """Handle the config command logic"""
    path = config_file or DEFAULT_CONFIG_FILE
    store = ConfigStore(path)
    config = store.load()

    if set_mode:
        updated, changed = update_config_settings(config, **overrides)
        if changed:
            store.save(updated)
            click.echo(f"{Colors.GREEN}✓ Configuration saved to {path}{Colors.RESET}")
        else:
            click.echo(f"{Colors.YELLOW}No configuration changes specified{Colors.RESET}")
        return

    show_config_display(config.with_overrides(**overrides), path)


def handle_experiment_command(name: str, config: EngineConfig, universities: int, out: Optional[Path]) -> None:
    """Handle the experiment command logic"""
    spec = SyntheticSpec(universities=universities, seed=config.seed)
    click.echo(f"{Colors.BLUE}Running {name} on {universities} generated universit"
               f"{'y' if universities == 1 else 'ies'} (k={config.k}){Colors.RESET}")
    experiment = EXPERIMENTS[name](config, spec)
    show_adapt_result(experiment.result)
    click.echo()

    show_cost_summary(experiment.initial, "Initial partition")
    show_cost_summary(experiment.adaptive, "Adaptive partition")
    before, after = experiment.focus_distributed_joins()
    change = (before - after) / before * 100 if before else 0.0
    click.echo(
        f"Distributed joins of {', '.join(experiment.focus)}: {before} -> {after} "
        f"({Colors.GREEN if after <= before else Colors.RED}{change:.1f}% fewer{Colors.RESET})"
    )

    if out is None:
        click.echo()
        click.echo(experiment.comparison_csv(), nl=False)
    else:
        _write(out, experiment.comparison_csv(), "Comparison")
