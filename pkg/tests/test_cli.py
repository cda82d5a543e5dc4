#!/usr/bin/env python3
"""
Test suite for kgpart CLI commands
"""

import json
import shutil
import tempfile
from pathlib import Path

import pytest
from click.testing import CliRunner

from kgpart.cli import adapt, config, experiment, generate, main, partition, report, run
from kgpart.partitioner import Partition
from kgpart.workload import workload_lines

from tests.conftest import six_predicate_partition, six_predicate_text, star_query


class TestKgPartCLI:
    """Test kgpart CLI commands"""

    def setup_method(self):
        """Set up test files for each test"""
        self.test_dir = Path(tempfile.mkdtemp())
        self.runner = CliRunner()
        self.data = self.test_dir / "data.nt"
        self.data.write_text(six_predicate_text())
        self.workload = self.test_dir / "workload.jsonl"
        self.write_workload(with_q3=False)
        self.partition = self.test_dir / "partition.json"

    def teardown_method(self):
        """Clean up after each test"""
        if self.test_dir.exists():
            shutil.rmtree(self.test_dir)

    def write_workload(self, with_q3: bool):
        records = [("Q1", star_query("Q1", "a", "b"), 1), ("Q2", star_query("Q2", "c", "d"), 1)]
        if with_q3:
            records.append(("Q3", star_query("Q3", "e", "f"), 1))
        self.workload.write_text(workload_lines(records) + "\n")

    def files(self, *extra):
        return ["-d", str(self.data), "-w", str(self.workload), *extra]

    def test_version(self):
        result = self.runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "kgpart" in result.output

    def test_partition_command(self):
        """Test partition writes a partition that assigns every unit once"""
        result = self.runner.invoke(partition, self.files("--k", "2", "-o", str(self.partition)))
        assert result.exit_code == 0, result.output
        assert "Partition written to" in result.output
        assert "shard 1" in result.output

        written = Partition.from_json(self.partition.read_text())
        assert written.k == 2
        units = written.units()
        assert len(units) == 6
        assert set(units.values()) == {0, 1}
        manifest = json.loads((self.test_dir / "partition.manifest.json").read_text())
        assert [shard["triples"] for shard in manifest] == [25, 25]

    def test_partition_too_many_shards(self):
        """Test more shards than predicates is an input error"""
        result = self.runner.invoke(partition, self.files("--k", "9", "-o", str(self.partition)))
        assert result.exit_code == 2
        assert "Error:" in result.output

    def test_malformed_workload_line(self):
        """Test a bad workload line exits 2 and names the line"""
        with open(self.workload, "a") as f:
            f.write('{"id": "Q9", "query": "SELECT * WHERE { ?x ?p ?o }"}\n')
        result = self.runner.invoke(partition, self.files("--k", "2", "-o", str(self.partition)))
        assert result.exit_code == 2
        assert "line 3" in result.output
        assert not self.partition.exists()

    def test_malformed_data_line(self):
        self.data.write_text("<http://a> <http://p> .\n")
        result = self.runner.invoke(partition, self.files("-o", str(self.partition)))
        assert result.exit_code == 2
        assert "line 1" in result.output

    def test_missing_data_file(self):
        result = self.runner.invoke(partition, ["-d", "missing.nt", "-w", str(self.workload), "-o", "p.json"])
        assert result.exit_code == 2

    def test_run_is_repeatable(self):
        """Test two runs over the same inputs print the same CSV"""
        self.partition.write_text(six_predicate_partition().to_json())
        first = self.runner.invoke(run, self.files("-p", str(self.partition)))
        second = self.runner.invoke(run, self.files("-p", str(self.partition)))
        assert first.exit_code == 0, first.output
        assert first.output == second.output
        assert first.output.splitlines()[0] == "query_id,frequency,local_joins,dist_joins,rows,cost_units"

    def test_run_writes_timings(self):
        self.partition.write_text(six_predicate_partition().to_json())
        out = self.test_dir / "cost.csv"
        timings = self.test_dir / "timings.csv"
        result = self.runner.invoke(run, self.files("-p", str(self.partition), "-o", str(out), "--timings", str(timings)))
        assert result.exit_code == 0, result.output
        assert "Weighted average cost" in result.output
        assert timings.read_text().splitlines()[0] == "query_id,mean_ms,samples"

    def test_run_with_incomplete_partition(self):
        partial = six_predicate_partition()
        partial.orphan.clear()
        self.partition.write_text(partial.to_json())
        result = self.runner.invoke(run, self.files("-p", str(self.partition)))
        assert result.exit_code == 2
        assert "no shard" in result.output

    def test_adapt_commits_then_noop(self):
        """Test adapting to a new query commits once and is a no-op afterwards"""
        self.partition.write_text(six_predicate_partition().to_json())
        self.write_workload(with_q3=True)

        result = self.runner.invoke(adapt, self.files("-p", str(self.partition)))
        assert result.exit_code == 0, result.output
        assert "COMMITTED" in result.output
        committed = Partition.from_json(self.partition.read_text())
        assert committed.version == 2
        plan = json.loads((self.test_dir / "partition.plan.json").read_text())
        assert [(m["from"], m["to"], m["triples"]) for m in plan["moves"]] == [(0, 1, 5)]
        compare = (self.test_dir / "partition.compare.csv").read_text().splitlines()
        assert compare[0].startswith("query_id,frequency,initial_dist_joins")

        again = self.runner.invoke(adapt, self.files("-p", str(self.partition)))
        assert again.exit_code == 0, again.output
        assert "NO-OP" in again.output
        assert "left unchanged" in again.output
        assert Partition.from_json(self.partition.read_text()) == committed

    def test_adapt_to_separate_file(self):
        self.partition.write_text(six_predicate_partition().to_json())
        self.write_workload(with_q3=True)
        out = self.test_dir / "next.json"
        result = self.runner.invoke(adapt, self.files("-p", str(self.partition), "-o", str(out)))
        assert result.exit_code == 0, result.output
        assert Partition.from_json(out.read_text()).version == 2
        assert Partition.from_json(self.partition.read_text()).version == 1
        assert (self.test_dir / "next.plan.json").exists()

    def test_report(self):
        self.partition.write_text(six_predicate_partition().to_json())
        dendrogram = self.test_dir / "tree.json"
        distances = self.test_dir / "distances.csv"
        args = self.files("-p", str(self.partition), "--dendrogram", str(dendrogram), "--distances", str(distances))
        result = self.runner.invoke(report, args)
        assert result.exit_code == 0, result.output
        assert "Capacity per shard" in result.output
        assert "Feature groups" in result.output
        assert json.loads(dendrogram.read_text())["leaves"] == ["Q1", "Q2"]
        assert distances.read_text().splitlines()[0] == ",Q1,Q2"

    def test_generate(self):
        """Test generate writes data and the benchmark workload"""
        out = self.test_dir / "lubm.nt"
        workload = self.test_dir / "lubm.jsonl"
        result = self.runner.invoke(generate, ["-o", str(out), "--seed", "3", "-w", str(workload), "--with-extra"])
        assert result.exit_code == 0, result.output
        assert "Generated" in result.output
        assert out.stat().st_size > 0
        assert len(workload.read_text().splitlines()) == 24

    def test_generate_is_deterministic(self):
        first, second = self.test_dir / "a.nt", self.test_dir / "b.nt"
        self.runner.invoke(generate, ["-o", str(first)])
        self.runner.invoke(generate, ["-o", str(second)])
        assert first.read_bytes() == second.read_bytes()

    def test_config_display(self):
        """Test config command shows configuration"""
        config_file = self.test_dir / "kgpart.json"
        result = self.runner.invoke(config, ["--config", str(config_file)])
        assert result.exit_code == 0
        assert "kgpart configuration:" in result.output
        assert "Config file:" in result.output
        assert not config_file.exists()

    def test_config_set(self):
        """Test config command can set values with --set flag"""
        config_file = self.test_dir / "kgpart.json"
        result = self.runner.invoke(config, ["--set", "--config", str(config_file), "--k", "4", "--tolerance", "0.1"])
        assert result.exit_code == 0, result.output
        assert "Shard count set to: 4" in result.output
        assert "Configuration saved to" in result.output
        saved = json.loads(config_file.read_text())
        assert saved["k"] == 4
        assert saved["balance_tolerance"] == 0.1

    def test_config_set_without_changes(self):
        config_file = self.test_dir / "kgpart.json"
        result = self.runner.invoke(config, ["--set", "--config", str(config_file)])
        assert result.exit_code == 0
        assert "No configuration changes specified" in result.output
        assert not config_file.exists()

    def test_config_without_set_does_not_write(self):
        """Test config command requires --set flag to modify values"""
        config_file = self.test_dir / "kgpart.json"
        result = self.runner.invoke(config, ["--config", str(config_file), "--k", "5"])
        assert result.exit_code == 0
        assert "Shard count: 5" in result.output
        assert not config_file.exists()

    def test_config_file_used_by_commands(self):
        config_file = self.test_dir / "kgpart.json"
        self.runner.invoke(config, ["--set", "--config", str(config_file), "--k", "2"])
        result = self.runner.invoke(partition, self.files("-c", str(config_file), "-o", str(self.partition)))
        assert result.exit_code == 0, result.output
        assert Partition.from_json(self.partition.read_text()).k == 2

    def test_invalid_config_file(self):
        config_file = self.test_dir / "kgpart.json"
        config_file.write_text(json.dumps({"k": 0}))
        result = self.runner.invoke(partition, self.files("-c", str(config_file), "-o", str(self.partition)))
        assert result.exit_code == 2
        assert "invalid configuration" in result.output

    def test_experiment_choices(self):
        result = self.runner.invoke(experiment, ["no-such-experiment"])
        assert result.exit_code == 2

    def test_experiment_writes_comparison(self):
        out = self.test_dir / "compare.csv"
        result = self.runner.invoke(experiment, ["new-queries", "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert "Adaptation:" in result.output
        lines = out.read_text().splitlines()
        assert lines[-1].startswith("TOTAL,")
        assert len(lines) == 26


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
