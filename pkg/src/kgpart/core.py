"""
Core kgpart functionality: the engine tying data, workload, partition,
simulated cluster and adaptation together.
"""

import csv
import io
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .benchmark import (
    EXTRA_QUERIES,
    LUBM_QUERIES,
    SyntheticSpec,
    biased_frequencies,
    build_workload,
    generate_graph,
)
from .config import EngineConfig
from .errors import PartitionMismatch
from .federation import CostReport, Shard, apply_migration, deploy, run_workload, simulate
from .kg_model import KnowledgeGraph, load_ntriples
from .partitioner import AdaptResult, Partition, adapt, check_partition, initial_partition, unit_sizes
from .workload import FeatureMetadata, TimingMetadata, Workload, adaptation_due, load_workload

logger = logging.getLogger(__name__)


class PartitionEngine:
    """Master control loop over one graph and its workload"""

    def __init__(self, graph: KnowledgeGraph, workload: Workload, config: Optional[EngineConfig] = None):
        self.graph = graph
        self.workload = workload
        self.config = config or EngineConfig()
        self.partition: Optional[Partition] = None
        self.shards: List[Shard] = []
        self.features: Optional[FeatureMetadata] = None
        self.timing: Optional[TimingMetadata] = None
        self._swap_lock = threading.Lock()

    @classmethod
    def from_files(
        cls,
        data: Union[str, Path],
        workload: Union[str, Path],
        config: Optional[EngineConfig] = None,
        partition: Optional[Union[str, Path]] = None,
    ) -> "PartitionEngine":
        engine = cls(load_ntriples(data), load_workload(workload), config)
        if partition is not None:
            engine.install(Partition.from_json(Path(partition).read_text(encoding="utf-8")))
        return engine

    def current(self) -> Tuple[Partition, List[Shard]]:
        """The partition version in service and its shards"""
        with self._swap_lock:
            if self.partition is None:
                raise PartitionMismatch("no partition has been built or loaded")
            return self.partition, self.shards

    def _feature_metadata(self, partition: Partition, workload: Workload) -> FeatureMetadata:
        return FeatureMetadata.build(
            partition.units(), unit_sizes(self.graph, partition), workload.feature_usage()
        )

    def install(self, partition: Partition) -> Partition:
        check_partition(self.graph, partition)
        shards = deploy(self.graph, partition, self.config.endpoint_template)
        features = self._feature_metadata(partition, self.workload)
        with self._swap_lock:
            self.partition, self.shards, self.features = partition, shards, features
        return partition

    def build_partition(self) -> Partition:
        partition = initial_partition(
            self.graph,
            self.workload,
            self.config.k,
            self.config.cut_d,
            self.config.weights,
            linkage=self.config.linkage,
            tolerance=self.config.balance_tolerance,
            join_term=self.config.join_term,
            max_hops=self.config.max_hops,
        )
        return self.install(partition)

    def run(self, record: bool = True) -> CostReport:
        """Execute the workload on the current shards"""
        partition, shards = self.current()
        report = run_workload(
            self.workload,
            shards,
            partition,
            self.graph,
            self.config.cost,
            record=record,
            endpoint_template=self.config.endpoint_template,
        )
        if record:
            if self.timing is None:
                self.timing = TimingMetadata.from_workload(self.workload)
                self.timing.adapted_epoch = partition.epoch
            self.timing.observe(self.workload, runs=1)
        return report

    def adaptation_due(self) -> bool:
        if self.timing is None:
            return self.partition is not None and self.partition.frequencies != self.workload.frequencies()
        return adaptation_due(
            self.timing,
            self.config.threshold,
            self.config.threshold_trigger,
            self.config.snapshot_interval,
        )

    def adapt(self) -> AdaptResult:
        """Run one adaptation against a snapshot and swap in the result if committed"""
        partition, _ = self.current()
        snapshot = self.workload.snapshot()
        result = adapt(partition, self.graph, snapshot, self.config)
        if result.committed and result.refined is not None:
            relabelled = deploy(self.graph, result.refined, self.config.endpoint_template)
            migrated = apply_migration(relabelled, result.plan)
            features = self._feature_metadata(result.partition, snapshot)
            with self._swap_lock:
                self.partition, self.shards, self.features = result.partition, migrated, features
        if self.timing is not None and result.status != "no-op":
            self.timing.mark_adapted(self.timing.latest)
        return result

    def maybe_adapt(self) -> Optional[AdaptResult]:
        if not self.adaptation_due():
            return None
        return self.adapt()


@dataclass
class ExperimentResult:
    name: str
    result: AdaptResult
    initial: CostReport
    adaptive: CostReport
    focus: List[str] = field(default_factory=list)

    def focus_distributed_joins(self) -> Tuple[int, int]:
        return (
            self.initial.weighted_distributed_joins(self.focus),
            self.adaptive.weighted_distributed_joins(self.focus),
        )

    def comparison_csv(self) -> str:
        return comparison_csv(self.initial, self.adaptive)


def comparison_csv(initial: CostReport, adaptive: CostReport) -> str:
    """Initial against adaptive cost per query"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["query_id", "frequency", "initial_dist_joins", "adaptive_dist_joins", "initial_cost", "adaptive_cost"]
    )
    for qid, before in initial.by_query.items():
        after = adaptive.by_query[qid]
        writer.writerow(
            [
                qid,
                before.frequency,
                before.distributed_joins,
                after.distributed_joins,
                f"{before.cost_units:.4f}",
                f"{after.cost_units:.4f}",
            ]
        )
    writer.writerow(
        [
            "TOTAL",
            initial.total_frequency,
            initial.weighted_distributed_joins(),
            adaptive.weighted_distributed_joins(),
            f"{initial.weighted_average:.4f}",
            f"{adaptive.weighted_average:.4f}",
        ]
    )
    return buffer.getvalue()


def _finish(name: str, engine: PartitionEngine, initial_partition_: Partition, focus: List[str]) -> ExperimentResult:
    initial = simulate(engine.graph, engine.workload, initial_partition_, engine.config.cost)
    result = engine.adapt()
    adaptive = simulate(engine.graph, engine.workload, result.partition, engine.config.cost)
    logger.info("%s: %s (%s)", name, result.status, result.reason or "gates passed")
    return ExperimentResult(name, result, initial, adaptive, focus)


def new_queries_experiment(
    config: Optional[EngineConfig] = None,
    spec: Optional[SyntheticSpec] = None,
    graph: Optional[KnowledgeGraph] = None,
) -> ExperimentResult:
    """Partition for the base queries, then add the extra queries and adapt"""
    config = config or EngineConfig()
    graph = graph or generate_graph(spec or SyntheticSpec(seed=config.seed))
    engine = PartitionEngine(graph, build_workload(LUBM_QUERIES), config)
    partition = engine.build_partition()
    build_workload(EXTRA_QUERIES, workload=engine.workload)
    return _finish("new-queries", engine, partition, list(EXTRA_QUERIES))


def frequency_bias_experiment(
    config: Optional[EngineConfig] = None,
    spec: Optional[SyntheticSpec] = None,
    graph: Optional[KnowledgeGraph] = None,
    query_id: str = "Q1",
    share: float = 0.5,
) -> ExperimentResult:
    """Partition for uniform frequencies, then bias one query and adapt"""
    config = config or EngineConfig()
    graph = graph or generate_graph(spec or SyntheticSpec(seed=config.seed))
    engine = PartitionEngine(graph, build_workload(LUBM_QUERIES), config)
    partition = engine.build_partition()
    frequencies: Dict[str, int] = biased_frequencies(query_id, share, LUBM_QUERIES)
    build_workload(LUBM_QUERIES, frequencies, workload=engine.workload)
    return _finish("frequency-bias", engine, partition, [query_id])


EXPERIMENTS = {
    "new-queries": new_queries_experiment,
    "frequency-bias": frequency_bias_experiment,
}
