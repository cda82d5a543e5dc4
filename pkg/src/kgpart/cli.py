#!/usr/bin/env python3
"""
kgpart - workload-aware adaptive partitioning of knowledge graphs.

The CLI is split across dedicated modules:
- status_display: partition, cost and adaptation summaries
- config_management: configuration display and modification
- command_handlers: Click command handler implementations
"""

import logging
from pathlib import Path

import click

from . import __version__
from .clustering import Linkage
from .command_handlers import (
    exit_on_error,
    handle_adapt_command,
    handle_config_command,
    handle_experiment_command,
    handle_generate_command,
    handle_partition_command,
    handle_report_command,
    handle_run_command,
    resolve_config,
)
from .config import DEFAULT_CUT, DEFAULT_K, DEFAULT_SEED, DEFAULT_THRESHOLD, GATE_METRICS, JOIN_TERMS
from .core import EXPERIMENTS

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, path_type=Path)
LINKAGES = click.Choice([linkage.value for linkage in Linkage])


def data_option(func):
    return click.option("--data", "-d", required=True, type=EXISTING_FILE, help="N-Triples data file")(func)


def workload_option(func):
    return click.option("--workload", "-w", required=True, type=EXISTING_FILE, help="JSONL workload file")(func)


def partition_option(func):
    return click.option("--partition", "-p", required=True, type=EXISTING_FILE, help="Partition JSON file")(func)


def engine_options(func):
    """Config file plus the flags that override it"""
    options = [
        click.option("--config", "-c", "config_file", type=EXISTING_FILE, help="JSON configuration file"),
        click.option("--k", type=click.IntRange(min=1), help=f"Number of shards (default: {DEFAULT_K})"),
        click.option("--seed", type=int, help=f"Seed for synthetic data (default: {DEFAULT_SEED})"),
        click.option("--linkage", type=LINKAGES, help="HAC linkage (default: single)"),
        click.option("--cut", "cut_d", type=click.FloatRange(0, 1), help=f"Dendrogram cut distance (default: {DEFAULT_CUT})"),
        click.option(
            "--threshold",
            type=click.FloatRange(min=0),
            help=f"Relative runtime change that triggers adaptation (default: {DEFAULT_THRESHOLD})",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.version_option(version=__version__, prog_name="kgpart")
@click.option("--verbose", "-v", count=True, help="Log progress (-v info, -vv debug)")
def main(verbose):
    """kgpart - workload-aware adaptive knowledge graph partitioning

    Partitions an RDF dataset into shards around the features its SPARQL
    workload uses, simulates federated execution and adapts the partition
    when the workload changes.
    """
    if verbose:
        logging.basicConfig(
            level=logging.DEBUG if verbose > 1 else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )


@main.command()
@click.option("--out", "-o", required=True, type=OUTPUT_FILE, help="N-Triples file to write")
@click.option("--universities", "-u", default=1, type=click.IntRange(min=1), help="Number of universities")
@click.option("--seed", default=DEFAULT_SEED, type=int, help=f"Generator seed (default: {DEFAULT_SEED})")
@click.option("--workload", "-w", "workload_path", type=OUTPUT_FILE, help="Also write the benchmark workload (JSONL)")
@click.option("--with-extra", is_flag=True, help="Include the ten extra queries in the workload")
@exit_on_error
def generate(out, universities, seed, workload_path, with_extra):
    """Generate a seeded university knowledge graph"""
    handle_generate_command(out, universities, seed, workload_path, with_extra)


@main.command()
@data_option
@workload_option
@engine_options
@click.option("--out", "-o", required=True, type=OUTPUT_FILE, help="Partition JSON to write")
@click.option("--manifest", type=OUTPUT_FILE, help="Shard manifest JSON (default: next to --out)")
@exit_on_error
def partition(data, workload, config_file, k, seed, linkage, cut_d, threshold, out, manifest):
    """Build the initial workload-aware partition"""
    config = resolve_config(config_file, k=k, seed=seed, linkage=linkage, cut_d=cut_d, threshold=threshold)
    handle_partition_command(data, workload, config, out, manifest)


@main.command()
@data_option
@workload_option
@partition_option
@engine_options
@click.option("--out", "-o", type=OUTPUT_FILE, help="Cost report CSV (default: stdout)")
@click.option("--timings", type=OUTPUT_FILE, help="Per-query simulated timings CSV")
@exit_on_error
def run(data, workload, partition, config_file, k, seed, linkage, cut_d, threshold, out, timings):
    """Execute the workload on the simulated cluster"""
    config = resolve_config(config_file, k=k, seed=seed, linkage=linkage, cut_d=cut_d, threshold=threshold)
    handle_run_command(data, workload, partition, config, out, timings)


@main.command()
@data_option
@workload_option
@partition_option
@engine_options
@click.option("--out", "-o", type=OUTPUT_FILE, help="Where to write a committed partition (default: --partition)")
@click.option("--plan", type=OUTPUT_FILE, help="Migration plan JSON (default: next to the partition)")
@click.option("--compare", type=OUTPUT_FILE, help="Initial vs adaptive cost CSV (default: next to the partition)")
@click.option("--join-term", type=click.Choice(JOIN_TERMS), help="Join term used in feature scores")
@click.option("--gate-metric", type=click.Choice(GATE_METRICS), help="Cost compared by the commit gate")
@exit_on_error
def adapt(
    data, workload, partition, config_file, k, seed, linkage, cut_d, threshold, out, plan, compare, join_term, gate_metric
):
    """Adapt the partition to the current workload"""
    config = resolve_config(
        config_file,
        k=k,
        seed=seed,
        linkage=linkage,
        cut_d=cut_d,
        threshold=threshold,
        join_term=join_term,
        gate_metric=gate_metric,
    )
    handle_adapt_command(data, workload, partition, config, out, plan, compare)


@main.command()
@data_option
@workload_option
@partition_option
@engine_options
@click.option("--out", "-o", type=OUTPUT_FILE, help="Cost report CSV")
@click.option("--dendrogram", type=OUTPUT_FILE, help="Workload dendrogram JSON")
@click.option("--distances", type=OUTPUT_FILE, help="Query distance matrix CSV")
@exit_on_error
def report(data, workload, partition, config_file, k, seed, linkage, cut_d, threshold, out, dendrogram, distances):
    """Show balance, cost and feature groups of a partition"""
    config = resolve_config(config_file, k=k, seed=seed, linkage=linkage, cut_d=cut_d, threshold=threshold)
    handle_report_command(data, workload, partition, config, out, dendrogram, distances)


@main.command()
@click.option("--set", "set_mode", is_flag=True, help="Write the given settings to the config file")
@click.option("--config", "-c", "config_file", type=OUTPUT_FILE, help="Config file (default: ./kgpart.json)")
@click.option("--k", type=click.IntRange(min=1), help="Number of shards")
@click.option("--seed", type=int, help="Seed for synthetic data")
@click.option("--linkage", type=LINKAGES, help="HAC linkage")
@click.option("--cut", "cut_d", type=click.FloatRange(0, 1), help="Dendrogram cut distance")
@click.option("--threshold", type=click.FloatRange(min=0), help="Adaptation threshold")
@click.option("--tolerance", "balance_tolerance", type=click.FloatRange(min=0), help="Balance tolerance")
@click.option("--join-term", type=click.Choice(JOIN_TERMS), help="Join term used in feature scores")
@click.option("--gate-metric", type=click.Choice(GATE_METRICS), help="Cost compared by the commit gate")
@exit_on_error
def config(set_mode, config_file, **settings):
    """Show or modify configuration"""
    handle_config_command(config_file, set_mode, **settings)


@main.command()
@click.argument("name", type=click.Choice(sorted(EXPERIMENTS)))
@engine_options
@click.option("--universities", "-u", default=1, type=click.IntRange(min=1), help="Number of universities")
@click.option("--out", "-o", type=OUTPUT_FILE, help="Comparison CSV (default: stdout)")
@exit_on_error
def experiment(name, config_file, k, seed, linkage, cut_d, threshold, universities, out):
    """Run an end-to-end adaptation experiment on generated data"""
    config = resolve_config(config_file, k=k, seed=seed, linkage=linkage, cut_d=cut_d, threshold=threshold)
    handle_experiment_command(name, config, universities, out)


if __name__ == "__main__":
    main()
