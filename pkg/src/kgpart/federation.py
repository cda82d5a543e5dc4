"""
Federated execution simulator.

Shards hold disjoint triple subsets; each query runs on its primary
processing node and reaches other shards through SERVICE blocks. Costs are
counted in simulated units where distributed joins dominate.
"""

import csv
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .config import DEFAULT_ENDPOINT_TEMPLATE, CostModel
from .errors import PartitionMismatch, StaleMigration, UnownedPattern
from .kg_model import KnowledgeGraph
from .partitioner import MigrationPlan, Partition, pattern_sources, primary_shard
from .query_analyzer import QueryFeatures, QuerySpec, extract_features, render_pattern, render_query
from .terms import Feature, Term, TriplePattern, Variable
from .workload import Workload

logger = logging.getLogger(__name__)

Binding = Dict[Variable, int]
Row = Tuple[Optional[Term], ...]


@dataclass
class Shard:
    shard_id: int
    endpoint_name: str
    units: Dict[Feature, Set[int]] = field(default_factory=dict)

    @property
    def triples(self) -> Set[int]:
        return set().union(*self.units.values()) if self.units else set()

    @property
    def resident_features(self) -> Set[Feature]:
        return set(self.units)

    def __len__(self) -> int:
        return sum(len(ids) for ids in self.units.values())

    def copy(self) -> "Shard":
        return Shard(self.shard_id, self.endpoint_name, {u: set(ids) for u, ids in self.units.items()})


@dataclass(frozen=True)
class PatternPlacement:
    index: int
    pattern: TriplePattern
    home: int
    sources: Tuple[int, ...]

    @property
    def fan_out(self) -> int:
        return len(self.sources) - 1


@dataclass(frozen=True)
class FederatedQuery:
    query: QuerySpec
    features: QueryFeatures
    primary_node: int
    placements: Tuple[PatternPlacement, ...]
    endpoint_template: str = DEFAULT_ENDPOINT_TEMPLATE

    @property
    def local_patterns(self) -> List[TriplePattern]:
        return [p.pattern for p in self.placements if p.home == self.primary_node]

    def segments(self) -> List[Tuple[Tuple[int, ...], List[TriplePattern]]]:
        """Source shards and patterns of each line of the rewritten body.

        A fanned-out pattern is a segment of its own. Consecutive patterns
        homed on the same remote shard share one segment.
        """
        segments: List[Tuple[Tuple[int, ...], List[TriplePattern]]] = []
        mergeable: Optional[int] = None
        for placement in self.placements:
            if placement.fan_out:
                segments.append((placement.sources, [placement.pattern]))
                mergeable = None
            elif placement.home == mergeable:
                segments[-1][1].append(placement.pattern)
            else:
                segments.append(((placement.home,), [placement.pattern]))
                mergeable = None if placement.home == self.primary_node else placement.home
        return segments

    @property
    def remote_blocks(self) -> List[Tuple[int, List[TriplePattern]]]:
        """One entry per SERVICE block of the serialized query"""
        return [
            (shard, patterns)
            for sources, patterns in self.segments()
            for shard in sources
            if shard != self.primary_node
        ]

    def endpoint(self, shard: int) -> str:
        return self.endpoint_template.format(shard=shard)

    def _source_text(self, shard: int, patterns: Sequence[TriplePattern]) -> str:
        body = " ".join(render_pattern(p, self.query.prefixes) for p in patterns)
        if shard == self.primary_node:
            return body
        return f"SERVICE <{self.endpoint(shard)}> {{ {body} }}"

    def body_lines(self) -> List[str]:
        lines: List[str] = []
        for sources, patterns in self.segments():
            if len(sources) > 1:
                lines.append(" UNION ".join(f"{{ {self._source_text(s, patterns)} }}" for s in sources))
            else:
                lines.append(self._source_text(sources[0], patterns))
        return lines

    def serialize(self) -> str:
        return render_query(self.query, self.body_lines())


@dataclass(frozen=True)
class QueryCost:
    query_id: str
    frequency: int
    local_joins: int
    distributed_joins: int
    result_rows: int
    cost_units: float


@dataclass
class CostReport:
    by_query: Dict[str, QueryCost] = field(default_factory=dict)

    def add(self, cost: QueryCost) -> None:
        self.by_query[cost.query_id] = cost

    @property
    def total(self) -> float:
        return sum(c.frequency * c.cost_units for c in self.by_query.values())

    @property
    def total_frequency(self) -> int:
        return sum(c.frequency for c in self.by_query.values())

    @property
    def weighted_average(self) -> float:
        frequency = self.total_frequency
        return self.total / frequency if frequency else 0.0

    @property
    def mean_cost(self) -> float:
        if not self.by_query:
            return 0.0
        return fmean(c.cost_units for c in self.by_query.values())

    def weighted_distributed_joins(self, query_ids: Optional[Iterable[str]] = None) -> int:
        ids = self.by_query if query_ids is None else list(query_ids)
        return sum(self.by_query[q].frequency * self.by_query[q].distributed_joins for q in ids)

    def to_csv(self) -> str:
        """One row per query; the TOTAL row sums frequency-weighted columns"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["query_id", "frequency", "local_joins", "dist_joins", "rows", "cost_units"])
        for c in self.by_query.values():
            writer.writerow(
                [c.query_id, c.frequency, c.local_joins, c.distributed_joins, c.result_rows, f"{c.cost_units:.4f}"]
            )
        costs = list(self.by_query.values())
        writer.writerow(
            [
                "TOTAL",
                self.total_frequency,
                sum(c.frequency * c.local_joins for c in costs),
                sum(c.frequency * c.distributed_joins for c in costs),
                sum(c.frequency * c.result_rows for c in costs),
                f"{self.total:.4f}",
            ]
        )
        return buffer.getvalue()


def deploy(
    graph: KnowledgeGraph,
    partition: Partition,
    endpoint_template: str = DEFAULT_ENDPOINT_TEMPLATE,
) -> List[Shard]:
    """Place every triple on the shard of its owning unit"""
    units = partition.units()
    shards = [Shard(i, endpoint_template.format(shard=i)) for i in range(partition.k)]
    owned = graph.group_by_owner(partition.assignment)
    for unit, triple_ids in owned.items():
        shard = units.get(unit)
        if shard is None:
            raise PartitionMismatch(f"no shard owns the triples of {unit}")
        shards[shard].units[unit] = set(triple_ids)
    for unit, shard in units.items():
        shards[shard].units.setdefault(unit, set())
    logger.info("Deployed %d triples over %d shard(s): %s", len(graph), partition.k, [len(s) for s in shards])
    return shards


def select_primary_node(q: QuerySpec, partition: Partition) -> int:
    return primary_shard(extract_features(q), partition.units())


def rewrite_federated(
    q: QuerySpec,
    partition: Partition,
    endpoint_template: str = DEFAULT_ENDPOINT_TEMPLATE,
) -> FederatedQuery:
    features = extract_features(q)
    units = partition.units()
    primary = primary_shard(features, units)
    placements = tuple(
        PatternPlacement(i, p, *pattern_sources(p, units, primary, partition.k)) for i, p in enumerate(q.patterns)
    )
    return FederatedQuery(q, features, primary, placements, endpoint_template)


def _extend(graph: KnowledgeGraph, bindings: List[Binding], pattern: TriplePattern, matches: Iterable[int]) -> List[Binding]:
    """Join the bindings with the matching triples on shared variables"""
    positions = [(i, term) for i, term in enumerate(pattern.terms()) if isinstance(term, Variable)]
    shared = sorted({v for _, v in positions if bindings and v in bindings[0]}, key=lambda v: v.name)

    index: Dict[Tuple[int, ...], List[Dict[Variable, int]]] = defaultdict(list)
    for triple_id in sorted(matches):
        ids = graph.ids(triple_id)
        values = {v: ids[i] for i, v in positions}
        index[tuple(values[v] for v in shared)].append(values)

    joined: List[Binding] = []
    for binding in bindings:
        for values in index.get(tuple(binding[v] for v in shared), ()):
            joined.append({**binding, **values})
    return joined


def _matches(graph: KnowledgeGraph, pattern: TriplePattern) -> Set[int]:
    return graph.lookup(pattern) if pattern.bound_positions() else graph.scan(pattern)


def _project(graph: KnowledgeGraph, bindings: List[Binding], select_vars: Sequence[Variable]) -> List[Row]:
    return [
        tuple(graph.term(b[v]) if v in b else None for v in select_vars) for b in bindings
    ]


def evaluate_bgp(graph: KnowledgeGraph, q: QuerySpec) -> List[Row]:
    """Single-store evaluation over the whole graph"""
    bindings: List[Binding] = [{}]
    for pattern in q.patterns:
        bindings = _extend(graph, bindings, pattern, _matches(graph, pattern))
        if not bindings:
            break
    return _project(graph, bindings, q.select_vars)


def _join_tally(fq: FederatedQuery) -> Tuple[int, int]:
    homes = {p.index: p.home for p in fq.placements}
    local = distributed = 0
    for join in fq.features.pattern_joins:
        if homes[join.left] == homes[join.right]:
            local += 1
        else:
            distributed += 1
    distributed += sum(p.fan_out for p in fq.placements)
    return local, distributed


def execute(
    fq: FederatedQuery,
    shards: Sequence[Shard],
    graph: KnowledgeGraph,
    cost_model: Optional[CostModel] = None,
    frequency: int = 1,
) -> Tuple[List[Row], QueryCost]:
    """Run the query against shard-local triples and price the joins"""
    cost_model = cost_model or CostModel()
    shard_triples: Dict[int, Set[int]] = {}
    bindings: List[Binding] = [{}]
    for placement in fq.placements:
        allowed: Set[int] = set()
        for shard in placement.sources:
            if not 0 <= shard < len(shards):
                raise UnownedPattern(placement.pattern, shard)
            if shard not in shard_triples:
                shard_triples[shard] = shards[shard].triples
            allowed |= shard_triples[shard]
        matches = _matches(graph, placement.pattern) & allowed
        bindings = _extend(graph, bindings, placement.pattern, matches)

    rows = _project(graph, bindings, fq.query.select_vars)
    local, distributed = _join_tally(fq)
    cost = QueryCost(
        query_id=fq.query.id,
        frequency=frequency,
        local_joins=local,
        distributed_joins=distributed,
        result_rows=len(rows),
        cost_units=cost_model.cost(distributed, local, len(rows)),
    )
    logger.debug("%s on shard %d: %s", fq.query.id, fq.primary_node, cost)
    return rows, cost


def run_workload(
    workload: Workload,
    shards: Sequence[Shard],
    partition: Partition,
    graph: KnowledgeGraph,
    cost_model: Optional[CostModel] = None,
    record: bool = True,
    endpoint_template: str = DEFAULT_ENDPOINT_TEMPLATE,
) -> CostReport:
    """Execute every query; each run records `frequency` simulated samples"""
    report = CostReport()
    for qid, entry in workload.entries.items():
        fq = rewrite_federated(entry.query, partition, endpoint_template)
        _, cost = execute(fq, shards, graph, cost_model, entry.frequency)
        report.add(cost)
        if record:
            for _ in range(entry.frequency):
                workload.record_run(qid, cost.cost_units)
    logger.info(
        "Workload of %d queries: weighted average cost %.4f", len(report.by_query), report.weighted_average
    )
    return report


def simulate(
    graph: KnowledgeGraph,
    workload: Workload,
    partition: Partition,
    cost_model: Optional[CostModel] = None,
) -> CostReport:
    """Cost of the workload under a partition, without recording timings"""
    return run_workload(workload, deploy(graph, partition), partition, graph, cost_model, record=False)


def apply_migration(shards: Sequence[Shard], plan: MigrationPlan) -> List[Shard]:
    """Move whole units between shards; returns the new shard list"""
    moved = [shard.copy() for shard in shards]
    for move in plan.moves:
        if not (0 <= move.from_shard < len(moved) and 0 <= move.to_shard < len(moved)):
            raise StaleMigration(move.feature, move.from_shard)
        source = moved[move.from_shard]
        if move.feature not in source.units:
            raise StaleMigration(move.feature, move.from_shard)
        triple_ids = source.units.pop(move.feature)
        moved[move.to_shard].units[move.feature] = triple_ids
        logger.debug("moved %s (%d triples) %d -> %d", move.feature, len(triple_ids), move.from_shard, move.to_shard)
    return moved


def shard_sizes(shards: Sequence[Shard]) -> List[int]:
    return [len(shard) for shard in shards]


def manifest_json(shards: Sequence[Shard]) -> str:
    """Cluster manifest: endpoint label and contents of each shard"""
    return json.dumps(
        [
            {
                "shard_id": s.shard_id,
                "endpoint_name": s.endpoint_name,
                "triples": len(s),
                "features": len(s.units),
            }
            for s in shards
        ],
        indent=2,
    ) + "\n"
