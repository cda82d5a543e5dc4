#!/usr/bin/env python3
"""
Test suite for the partition engine and the adaptation experiments
"""

import random
import tempfile
from pathlib import Path

import pytest

from kgpart.benchmark import SyntheticSpec
from kgpart.config import EngineConfig
from kgpart.core import (
    EXPERIMENTS,
    PartitionEngine,
    comparison_csv,
    frequency_bias_experiment,
    new_queries_experiment,
)
from kgpart.errors import PartitionMismatch
from kgpart.federation import shard_sizes
from kgpart.kg_model import from_text
from kgpart.partitioner import is_balanced, ownership_scan, shard_loads, unit_sizes
from kgpart.query_analyzer import parse_query
from kgpart.workload import Workload, workload_lines

from tests.conftest import (
    EX,
    p_feature,
    six_predicate_partition,
    six_predicate_text,
    six_predicate_workload,
    star_query,
)


class TestPartitionEngine:
    """Test the engine control loop"""

    def setup_method(self):
        self.graph = from_text(six_predicate_text())
        self.engine = PartitionEngine(self.graph, six_predicate_workload(), EngineConfig(k=2))

    def test_current_requires_partition(self):
        with pytest.raises(PartitionMismatch):
            self.engine.current()

    def test_build_and_run(self):
        partition = self.engine.build_partition()
        _, shards = self.engine.current()
        expected = six_predicate_partition()
        assert (partition.assignment, partition.orphan) == (expected.assignment, expected.orphan)
        assert shard_sizes(shards) == [25, 25]
        report = self.engine.run()
        assert report.weighted_distributed_joins() == 0
        assert self.engine.timing is not None

    def test_install_rejects_incomplete_partition(self):
        partition = six_predicate_partition()
        del partition.orphan[next(iter(partition.orphan))]
        with pytest.raises(PartitionMismatch):
            self.engine.install(partition)

    def test_adapt_swaps_shards(self):
        self.engine.build_partition()
        assert not self.engine.adaptation_due()
        self.engine.workload.register(parse_query(star_query("Q3", "e", "f"), "Q3"))
        assert self.engine.adaptation_due()
        result = self.engine.adapt()
        assert result.committed
        partition, shards = self.engine.current()
        assert partition is result.partition
        assert shard_sizes(shards) == [20, 30]
        assert self.engine.run().by_query["Q3"].distributed_joins == 0

    def test_feature_metadata_matches_ownership(self):
        partition = self.engine.build_partition()
        meta = self.engine.features
        for unit, triple_ids in self.graph.group_by_owner(partition.assignment).items():
            for triple_id in triple_ids:
                triple = self.graph.triple(triple_id)
                assert meta.shard_of(unit) == partition.owner_shard(triple.predicate, triple.object)
        assert sum(meta.shard_triples(s) for s in range(partition.k)) == len(self.graph)

    def test_feature_metadata_follows_commit(self):
        self.engine.build_partition()
        self.engine.workload.register(parse_query(star_query("Q3", "e", "f"), "Q3"))
        assert self.engine.features.shard_of(p_feature("e")) == 0
        result = self.engine.adapt()
        assert result.committed
        meta = self.engine.features
        assert meta.shard_of(p_feature("e")) == result.partition.assignment[p_feature("e")] == 1
        assert meta.usage[p_feature("e")] == 1
        assert [meta.shard_triples(s) for s in range(2)] == [20, 30]

    def test_adapt_twice_is_noop(self):
        self.engine.build_partition()
        self.engine.workload.register(parse_query(star_query("Q3", "e", "f"), "Q3"))
        self.engine.adapt()
        assert self.engine.adapt().status == "no-op"

    def test_maybe_adapt_waits_for_trigger(self):
        self.engine.build_partition()
        self.engine.run()
        assert self.engine.maybe_adapt() is None

    def test_from_files(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            data = Path(temp_dir) / "data.nt"
            workload = Path(temp_dir) / "workload.jsonl"
            partition = Path(temp_dir) / "partition.json"
            data.write_text(six_predicate_text())
            workload.write_text(
                workload_lines([("Q1", star_query("Q1", "a", "b"), 1), ("Q2", star_query("Q2", "c", "d"), 1)])
            )
            partition.write_text(six_predicate_partition().to_json())
            engine = PartitionEngine.from_files(data, workload, EngineConfig(k=2), partition)
            current, _ = engine.current()
            assert current == six_predicate_partition()


class TestAdaptSequence:
    """Test triple conservation over a long run of adaptations"""

    def test_fifty_steps_keep_every_triple_once(self):
        rng = random.Random(11)
        graph = from_text(
            "".join(f"<{EX}s{i}> <{EX}p{j}> <{EX}o{(i + j) % 5}> .\n" for i in range(10) for j in range(8))
        )

        def random_query(qid):
            patterns = []
            for i in range(rng.randint(1, 3)):
                obj = rng.choice([f"?o{i}", f"<{EX}o{rng.randrange(5)}>"])
                patterns.append(f"?x <{EX}p{rng.randrange(8)}> {obj}")
            return parse_query(f"SELECT ?x WHERE {{ {' . '.join(patterns)} }}", qid)

        workload = Workload()
        for i in range(2):
            workload.register(random_query(f"Q{i}"))
        engine = PartitionEngine(graph, workload, EngineConfig(k=2))
        engine.build_partition()
        all_ids = set(range(len(graph)))

        for step in range(50):
            if rng.random() < 0.5:
                workload.register(random_query(f"R{step}"), rng.randint(1, 4))
            else:
                entry = workload.entries[rng.choice(sorted(workload.entries))]
                workload.register(entry.query, rng.randint(1, 6))
            engine.adapt()

            partition, shards = engine.current()
            owners = ownership_scan(graph, partition)
            placed = [t for shard in shards for t in shard.triples]
            assert len(placed) == len(graph)
            assert set(placed) == all_ids
            for shard in shards:
                assert all(owners[t] == shard.shard_id for t in shard.triples)
            assert sum(engine.features.shard_triples(s) for s in range(2)) == len(graph)


class TestExperiments:
    """Test the adaptation experiments on one synthetic university"""

    @pytest.mark.parametrize("name", sorted(EXPERIMENTS))
    def test_adaptation_commits_balanced_improvement(self, university_graph, name):
        config = EngineConfig()
        outcome = EXPERIMENTS[name](config, graph=university_graph)
        assert outcome.result.committed
        assert outcome.adaptive.weighted_average < outcome.initial.weighted_average
        partition = outcome.result.partition
        loads = shard_loads(partition.units(), unit_sizes(university_graph, partition), partition.k)
        assert is_balanced(loads, config.balance_tolerance)

    def test_new_queries_cut_extra_query_joins(self, university_graph):
        outcome = new_queries_experiment(graph=university_graph)
        assert outcome.result.committed
        before, after = outcome.focus_distributed_joins()
        assert before > 0
        assert after <= 0.7 * before

    def test_new_queries_is_deterministic(self):
        spec = SyntheticSpec(universities=1, seed=42)
        first = new_queries_experiment(spec=spec)
        second = new_queries_experiment(spec=spec)
        assert first.result.partition.to_json() == second.result.partition.to_json()
        assert first.result.plan.to_json() == second.result.plan.to_json()
        assert first.result.refined.to_json() == second.result.refined.to_json()
        assert first.comparison_csv() == second.comparison_csv()

    def test_frequency_bias_focus(self, university_graph):
        outcome = frequency_bias_experiment(graph=university_graph)
        assert outcome.focus == ["Q1"]
        assert outcome.initial.by_query["Q1"].frequency == 13
        assert outcome.result.committed
        before, after = outcome.focus_distributed_joins()
        assert after <= before
        assert outcome.adaptive.weighted_average < outcome.initial.weighted_average

    def test_comparison_csv(self, university_graph):
        outcome = frequency_bias_experiment(graph=university_graph)
        lines = comparison_csv(outcome.initial, outcome.adaptive).splitlines()
        assert lines[0] == "query_id,frequency,initial_dist_joins,adaptive_dist_joins,initial_cost,adaptive_cost"
        assert lines[-1].startswith("TOTAL,26,")
        assert len(lines) == 16


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
