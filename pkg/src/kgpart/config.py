"""
Configuration management for kgpart
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .clustering import Linkage
from .errors import ConfigError

logger = logging.getLogger(__name__)

# Constants
DEFAULT_K = 3
DEFAULT_CUT = 0.75
DEFAULT_TOLERANCE = 0.25
DEFAULT_THRESHOLD = 0.2
DEFAULT_SEED = 42
DEFAULT_ENDPOINT_TEMPLATE = "http://shard{shard}.kgpart.local/sparql"
JOIN_TERMS = ("min", "sum", "literal")
GATE_METRICS = ("weighted", "mean")


@dataclass(frozen=True)
class Weights:
    """w1..w6 weigh the S_K statistics, w_join the distributed-join term"""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0
    w5: float = 1.0
    w6: float = 1.0
    w_join: float = 1.0

    def __post_init__(self) -> None:
        values = _field_values(self)
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise ConfigError("weights", "weights must be finite and non-negative")
        if not any(v > 0 for v in values):
            raise ConfigError("weights", "at least one weight must be positive")


@dataclass(frozen=True)
class CostModel:
    alpha: float = 10.0
    beta: float = 1.0
    gamma: float = 0.01

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("cost", "cost constants must be non-negative")
        if self.alpha < self.beta:
            raise ConfigError("cost", "alpha (distributed join) must be >= beta (local join)")

    def cost(self, distributed: int, local: int, rows: int) -> float:
        return self.alpha * distributed + self.beta * local + self.gamma * rows


def _field_values(obj: Any) -> tuple:
    return tuple(float(getattr(obj, f.name)) for f in fields(obj))


@dataclass(frozen=True)
class EngineConfig:
    k: int = DEFAULT_K
    linkage: Linkage = Linkage.SINGLE
    cut_d: float = DEFAULT_CUT
    weights: Weights = field(default_factory=Weights)
    balance_tolerance: float = DEFAULT_TOLERANCE
    threshold: float = DEFAULT_THRESHOLD
    cost: CostModel = field(default_factory=CostModel)
    seed: int = DEFAULT_SEED
    join_term: str = "min"
    gate_metric: str = "weighted"
    max_hops: int = 3
    snapshot_interval: int = 0
    threshold_trigger: bool = True
    endpoint_template: str = DEFAULT_ENDPOINT_TEMPLATE

    def __post_init__(self) -> None:
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k", "shard count must be a positive integer")
        try:
            object.__setattr__(self, "linkage", Linkage(self.linkage))
        except ValueError:
            raise ConfigError("linkage", f"expected one of {[l.value for l in Linkage]}")
        if not 0 <= self.cut_d <= 1:
            raise ConfigError("cut_d", "cut distance must be within [0, 1]")
        if self.balance_tolerance < 0:
            raise ConfigError("balance_tolerance", "tolerance must be non-negative")
        if self.threshold < 0:
            raise ConfigError("threshold", "threshold must be non-negative")
        if self.join_term not in JOIN_TERMS:
            raise ConfigError("join_term", f"expected one of {list(JOIN_TERMS)}")
        if self.gate_metric not in GATE_METRICS:
            raise ConfigError("gate_metric", f"expected one of {list(GATE_METRICS)}")
        if self.max_hops < 1:
            raise ConfigError("max_hops", "must be at least 1")
        if self.snapshot_interval < 0:
            raise ConfigError("snapshot_interval", "must be non-negative")
        if "{shard}" not in self.endpoint_template:
            raise ConfigError("endpoint_template", "must contain '{shard}'")

    def with_overrides(self, **overrides: Any) -> "EngineConfig":
        """Copy with every non-None override applied"""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["linkage"] = self.linkage.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        for key in sorted(set(data) - known):
            logger.warning("Ignoring unknown config key: %s", key)
        values = {key: value for key, value in data.items() if key in known}
        try:
            if "weights" in values:
                values["weights"] = _nested(Weights, values["weights"], "weights")
            if "cost" in values:
                values["cost"] = _nested(CostModel, values["cost"], "cost")
            return cls(**values)
        except (TypeError, ValueError) as e:
            raise ConfigError(None, str(e)) from e


def _nested(kind: Any, value: Any, key: str) -> Any:
    if isinstance(value, kind):
        return value
    if not isinstance(value, dict):
        raise ConfigError(key, "expected an object")
    allowed = {f.name for f in fields(kind)}
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(key, f"unknown field(s): {', '.join(sorted(unknown))}")
    return kind(**{k: float(v) for k, v in value.items()})


class ConfigStore:
    """Loads and saves an EngineConfig JSON document"""

    def __init__(self, config_file: Union[str, Path]):
        self.config_file = Path(config_file)

    def load(self) -> EngineConfig:
        """Load configuration, falling back to defaults if the file is absent"""
        if not self.config_file.exists():
            return EngineConfig()

        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(None, f"could not read {self.config_file}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(None, "config file must hold a JSON object")

        # Merge with defaults
        merged = EngineConfig().to_dict()
        for key, value in data.items():
            if key in ("weights", "cost") and isinstance(value, dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        return EngineConfig.from_dict(merged)

    def save(self, config: EngineConfig) -> Path:
        """Save configuration, keeping the last two versions as backups"""
        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        self._backup_config()
        with open(self.config_file, "w", encoding="utf-8") as f:
            json.dump(config.to_dict(), f, indent=2)
            f.write("\n")
        return self.config_file

    def _backup_config(self) -> None:
        if self.config_file.exists():
            backup1 = self.config_file.with_suffix(".json.backup.1")
            backup2 = self.config_file.with_suffix(".json.backup.2")

            # Rotate backups
            if backup1.exists():
                backup1.replace(backup2)
            self.config_file.replace(backup1)


def load_config(path: Optional[Union[str, Path]]) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return ConfigStore(path).load()
