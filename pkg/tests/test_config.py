#!/usr/bin/env python3
"""
Test suite for kgpart configuration
"""

import json
import logging
import shutil
import tempfile
from pathlib import Path

import pytest

from kgpart.clustering import Linkage
from kgpart.config import ConfigStore, CostModel, EngineConfig, Weights, load_config
from kgpart.config_management import show_config_display, update_config_settings
from kgpart.errors import ConfigError


class TestEngineConfig:
    """Test config defaults and validation"""

    def test_defaults(self):
        """Test default values"""
        config = EngineConfig()
        assert config.k == 3
        assert config.linkage is Linkage.SINGLE
        assert config.balance_tolerance == 0.25
        assert config.join_term == "min"
        assert config.gate_metric == "weighted"
        assert config.to_dict()["linkage"] == "single"

    def test_linkage_from_string(self):
        assert EngineConfig(linkage="average").linkage is Linkage.AVERAGE

    @pytest.mark.parametrize(
        "changes",
        [
            {"k": 0},
            {"k": True},
            {"cut_d": 1.5},
            {"balance_tolerance": -0.1},
            {"linkage": "ward"},
            {"join_term": "max"},
            {"gate_metric": "p95"},
            {"endpoint_template": "http://shard/sparql"},
        ],
    )
    def test_invalid_values(self, changes):
        """Test invalid settings raise ConfigError"""
        with pytest.raises(ConfigError):
            EngineConfig(**changes)

    def test_weights_need_one_positive(self):
        with pytest.raises(ConfigError):
            Weights(0, 0, 0, 0, 0, 0, 0)
        assert Weights(0, 0, 0, 0, 0, 0, 1).w_join == 1

    def test_cost_model_order(self):
        """Test a distributed join may not be cheaper than a local one"""
        with pytest.raises(ConfigError):
            CostModel(alpha=1, beta=2)
        assert CostModel().cost(2, 3, 100) == pytest.approx(24)

    def test_overrides_skip_none(self):
        config = EngineConfig().with_overrides(k=5, seed=None)
        assert config.k == 5
        assert config.seed == EngineConfig().seed

    def test_unknown_keys_ignored(self, caplog):
        """Test unknown keys are dropped with a warning"""
        with caplog.at_level(logging.WARNING, logger="kgpart.config"):
            config = EngineConfig.from_dict({"k": 4, "shards_per_rack": 2})
        assert config.k == 4
        assert "shards_per_rack" in caplog.text

    def test_unknown_weight_field(self):
        with pytest.raises(ConfigError):
            EngineConfig.from_dict({"weights": {"w9": 1}})


class TestConfigStore:
    """Test loading and saving config files"""

    def setup_method(self):
        self.test_dir = Path(tempfile.mkdtemp())
        self.config_file = self.test_dir / "kgpart.json"
        self.store = ConfigStore(self.config_file)

    def teardown_method(self):
        if self.test_dir.exists():
            shutil.rmtree(self.test_dir)

    def test_missing_file_gives_defaults(self):
        """Test loading a config file that does not exist"""
        assert self.store.load() == EngineConfig()
        assert load_config(None) == EngineConfig()

    def test_save_and_load(self):
        config = EngineConfig(k=4, linkage=Linkage.COMPLETE, weights=Weights(w_join=2.5))
        self.store.save(config)
        assert self.store.load() == config

    def test_partial_file_merged_with_defaults(self):
        """Test a partial file keeps defaults for everything else"""
        self.config_file.write_text(json.dumps({"k": 6, "weights": {"w_join": 3}}))
        config = self.store.load()
        assert config.k == 6
        assert config.weights.w_join == 3
        assert config.weights.w1 == 1
        assert config.cut_d == EngineConfig().cut_d

    def test_backups_rotated(self):
        """Test the last two versions are kept as backups"""
        for k in (2, 3, 4):
            self.store.save(EngineConfig(k=k))
        backup1 = self.test_dir / "kgpart.json.backup.1"
        backup2 = self.test_dir / "kgpart.json.backup.2"
        assert json.loads(backup1.read_text())["k"] == 3
        assert json.loads(backup2.read_text())["k"] == 2
        assert self.store.load().k == 4

    def test_corrupted_json(self):
        """Test a corrupted config file raises ConfigError"""
        self.config_file.write_text("{ invalid json")
        with pytest.raises(ConfigError):
            self.store.load()

    def test_non_object_json(self):
        self.config_file.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            self.store.load()

    def test_invalid_value_in_file(self):
        self.config_file.write_text(json.dumps({"k": -1}))
        with pytest.raises(ConfigError) as exc:
            self.store.load()
        assert exc.value.key == "k"


class TestConfigManagement:
    """Test the config display and update helpers"""

    def test_update_reports_changes(self, capsys):
        config, changed = update_config_settings(EngineConfig(), k=4, linkage="average", seed=None)
        output = capsys.readouterr().out
        assert changed
        assert config.k == 4
        assert config.linkage is Linkage.AVERAGE
        assert "Shard count set to: 4" in output
        assert "Linkage set to: average" in output

    def test_update_without_changes(self, capsys):
        config, changed = update_config_settings(EngineConfig(), k=3, linkage="single")
        assert not changed
        assert config == EngineConfig()
        assert capsys.readouterr().out == ""

    def test_display(self, capsys):
        with tempfile.TemporaryDirectory() as temp_dir:
            show_config_display(EngineConfig(), Path(temp_dir) / "kgpart.json")
        output = capsys.readouterr().out
        assert "kgpart configuration:" in output
        assert "not created yet" in output
        assert "Shard count: 3" in output
        assert "Score weights: w1=1, w2=1, w3=1, w4=1, w5=1, w6=1, w_join=1" in output
        assert "Cost model: alpha=10 beta=1 gamma=0.01" in output


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
