#!/usr/bin/env python3
"""
Status display functions for the kgpart CLI.

This module contains the functions that print partition, balance, cost
and adaptation summaries.
"""

from typing import Mapping, Sequence

import click

from .colors import Colors, colorize, status_label
from .federation import CostReport
from .partitioner import AdaptResult, Partition, capacity
from .terms import FeatureKind


def show_partition_summary(partition: Partition, loads: Sequence[int], tolerance: float) -> None:
    """Feature counts and triple load per shard"""
    click.echo(f"{Colors.BOLD}Partition v{partition.version} (k={partition.k}){Colors.RESET}")
    click.echo("-" * 60)
    total = sum(loads)
    cap = capacity(total, partition.k, tolerance) if partition.k else 0
    for shard in range(partition.k):
        features = [f for f, s in partition.assignment.items() if s == shard]
        p_count = sum(1 for f in features if f.kind is FeatureKind.P)
        po_count = len(features) - p_count
        orphans = sum(1 for s in partition.orphan.values() if s == shard)
        share = loads[shard] / total * 100 if total else 0.0
        color = "RED" if loads[shard] > cap + 1e-9 else "GREEN"
        click.echo(
            f"  {Colors.BLUE}shard {shard}{Colors.RESET}: "
            f"{colorize(f'{loads[shard]} triples ({share:.1f}%)', color)}  "
            f"P={p_count} PO={po_count} orphan={orphans}"
        )
    click.echo(f"  Capacity per shard: {cap:.1f} triples (tolerance {tolerance:.2f})")


def show_cost_summary(report: CostReport, title: str = "Workload cost") -> None:
    click.echo(f"{Colors.BOLD}{title}{Colors.RESET}")
    click.echo(f"  Queries: {len(report.by_query)}  (total frequency {report.total_frequency})")
    click.echo(f"  Weighted average cost: {report.weighted_average:.4f}")
    click.echo(f"  Mean cost per query:   {report.mean_cost:.4f}")
    click.echo(f"  Weighted distributed joins: {report.weighted_distributed_joins()}")


def show_adapt_result(result: AdaptResult) -> None:
    """Outcome line, reason, and the moves of the plan"""
    click.echo(f"Adaptation: {status_label(result.status)}")
    if result.reason:
        click.echo(f"  Reason: {result.reason}")
    plan = result.plan
    click.echo(
        f"  Cost: {plan.predicted_cost_before:.4f} -> {plan.predicted_cost_after:.4f}  "
        f"moves: {len(plan)} ({plan.triples_moved} triples)"
    )
    for move in plan.moves:
        click.echo(f"    {move.feature}: shard {move.from_shard} -> {move.to_shard} ({move.triple_count} triples)")


def show_query_table(rows: Mapping[str, Sequence[object]], headers: Sequence[str]) -> None:
    click.echo("  ".join(f"{h:>12}" for h in headers))
    for qid, values in rows.items():
        click.echo("  ".join(f"{str(v):>12}" for v in (qid, *values)))
