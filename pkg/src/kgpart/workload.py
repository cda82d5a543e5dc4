"""
Workload registry: queries, frequencies, run-time samples, timing metadata
and per-shard feature metadata, plus the triggers that start an adaptation.
"""

import csv
import io
import json
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple, Union

from .errors import (
    DuplicateIdWithDifferentText,
    InputError,
    MissingSamples,
    UnknownQuery,
    WorkloadFormatError,
)
from .query_analyzer import QueryFeatures, QuerySpec, extract_features, parse_query
from .terms import Feature

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.2


@dataclass
class WorkloadEntry:
    query: QuerySpec
    features: QueryFeatures
    frequency: int
    run_times: List[float] = field(default_factory=list)

    def windowed_mean(self) -> float:
        """Mean of the `frequency` most recent samples"""
        if not self.run_times:
            raise MissingSamples(self.query.id)
        return fmean(self.run_times[-self.frequency :])


class Workload:
    """Registered queries keyed by id, in registration order"""

    def __init__(self) -> None:
        self.entries: Dict[str, WorkloadEntry] = {}
        self.epoch = 0
        self.runs_recorded = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, query_id: object) -> bool:
        return query_id in self.entries

    def register(self, query: QuerySpec, frequency: int = 1) -> "Workload":
        if frequency < 1:
            raise InputError(f"frequency of {query.id} must be >= 1, got {frequency}")
        existing = self.entries.get(query.id)
        if existing is None:
            self.entries[query.id] = WorkloadEntry(query, extract_features(query), frequency)
            self.epoch += 1
            logger.info("Registered %s (f=%d), epoch %d", query.id, frequency, self.epoch)
        elif not existing.query.same_body(query):
            raise DuplicateIdWithDifferentText(query.id)
        elif existing.frequency != frequency:
            existing.frequency = frequency
            self.epoch += 1
            logger.info("Frequency of %s set to %d, epoch %d", query.id, frequency, self.epoch)
        return self

    def unregister(self, query_id: str) -> "Workload":
        if query_id not in self.entries:
            raise UnknownQuery(query_id)
        del self.entries[query_id]
        self.epoch += 1
        return self

    def record_run(self, query_id: str, elapsed: float) -> "Workload":
        if elapsed < 0:
            raise InputError(f"run time must be non-negative, got {elapsed}")
        with self._lock:
            entry = self.entries.get(query_id)
            if entry is None:
                raise UnknownQuery(query_id)
            entry.run_times.append(float(elapsed))
            self.runs_recorded += 1
        return self

    def mean_runtime(self, query_id: str) -> float:
        entry = self.entries.get(query_id)
        if entry is None:
            raise UnknownQuery(query_id)
        return entry.windowed_mean()

    def average_time(self) -> float:
        """Average over queries of each query's windowed mean"""
        if not self.entries:
            return 0.0
        return fmean(entry.windowed_mean() for entry in self.entries.values())

    def frequencies(self) -> Dict[str, int]:
        return {qid: entry.frequency for qid, entry in self.entries.items()}

    def total_frequency(self) -> int:
        return sum(entry.frequency for entry in self.entries.values())

    def feature_usage(self) -> Dict[Feature, int]:
        """Frequency-weighted number of queries using each feature"""
        usage: Dict[Feature, int] = defaultdict(int)
        for entry in self.entries.values():
            for feature in entry.features.features:
                usage[feature] += entry.frequency
        return dict(usage)

    def features(self) -> Set[Feature]:
        return {f for entry in self.entries.values() for f in entry.features.features}

    def snapshot(self) -> "Workload":
        """Independent copy for background readers"""
        with self._lock:
            clone = Workload()
            clone.entries = {
                qid: WorkloadEntry(e.query, e.features, e.frequency, list(e.run_times))
                for qid, e in self.entries.items()
            }
            clone.epoch = self.epoch
            clone.runs_recorded = self.runs_recorded
        return clone

    def timing_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["query_id", "mean_ms", "samples"])
        for qid, entry in self.entries.items():
            mean = f"{entry.windowed_mean():.4f}" if entry.run_times else ""
            writer.writerow([qid, mean, len(entry.run_times)])
        return buffer.getvalue()


@dataclass
class TimingMetadata:
    """Baseline and latest average workload times plus trigger state"""

    baseline: float = 0.0
    latest: float = 0.0
    per_query: Dict[str, float] = field(default_factory=dict)
    adapted_epoch: int = 0
    epoch: int = 0
    runs_since_adaptation: int = 0

    def __post_init__(self) -> None:
        if self.baseline < 0 or self.latest < 0:
            raise ValueError("timings must be non-negative")

    @classmethod
    def from_workload(cls, workload: Workload, adapted_epoch: Optional[int] = None) -> "TimingMetadata":
        average = workload.average_time()
        epoch = workload.epoch
        return cls(
            baseline=average,
            latest=average,
            per_query={qid: e.windowed_mean() for qid, e in workload.entries.items()},
            adapted_epoch=epoch if adapted_epoch is None else adapted_epoch,
            epoch=epoch,
        )

    def observe(self, workload: Workload, runs: int = 0) -> "TimingMetadata":
        self.latest = workload.average_time()
        self.per_query = {qid: e.windowed_mean() for qid, e in workload.entries.items()}
        self.epoch = workload.epoch
        self.runs_since_adaptation += runs
        return self

    def mark_adapted(self, baseline: float) -> "TimingMetadata":
        self.baseline = baseline
        self.latest = baseline
        self.adapted_epoch = self.epoch
        self.runs_since_adaptation = 0
        return self


@dataclass
class FeatureMetadata:
    """Where each feature lives, how many triples it owns, how much it is used"""

    shard_features: Dict[int, Set[Feature]]
    triple_counts: Dict[Feature, int]
    usage: Dict[Feature, int]

    @classmethod
    def build(
        cls,
        placement: Mapping[Feature, int],
        triple_counts: Mapping[Feature, int],
        usage: Mapping[Feature, int],
    ) -> "FeatureMetadata":
        shard_features: Dict[int, Set[Feature]] = defaultdict(set)
        for feature, shard in placement.items():
            shard_features[shard].add(feature)
        return cls(
            dict(shard_features),
            {f: triple_counts.get(f, 0) for f in placement},
            {f: usage.get(f, 0) for f in placement},
        )

    def inventory(self) -> List[Feature]:
        return sorted(self.triple_counts, key=Feature.sort_key)

    def shard_of(self, feature: Feature) -> Optional[int]:
        for shard, features in self.shard_features.items():
            if feature in features:
                return shard
        return None

    def shard_triples(self, shard: int) -> int:
        return sum(self.triple_counts[f] for f in self.shard_features.get(shard, ()))


def register_query(w: Workload, q: QuerySpec, frequency: int = 1) -> Workload:
    return w.register(q, frequency)


def unregister_query(w: Workload, query_id: str) -> Workload:
    return w.unregister(query_id)


def record_run(w: Workload, query_id: str, elapsed: float) -> Workload:
    return w.record_run(query_id, elapsed)


def average_workload_time(w: Workload) -> float:
    return w.average_time()


def adaptation_due(
    tm: TimingMetadata,
    threshold: float = DEFAULT_THRESHOLD,
    threshold_trigger: bool = True,
    snapshot_interval: int = 0,
) -> bool:
    """Degradation beyond the threshold, a workload change, or a due snapshot"""
    if tm.epoch > tm.adapted_epoch:
        return True
    if threshold_trigger and tm.latest >= tm.baseline * (1 + threshold) and tm.latest > 0:
        return True
    return snapshot_interval > 0 and tm.runs_since_adaptation >= snapshot_interval


def parse_workload_line(line: str, line_number: int, prefixes: Optional[Mapping[str, str]] = None) -> Tuple[QuerySpec, int]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WorkloadFormatError(line_number, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise WorkloadFormatError(line_number, "expected a JSON object")
    for key in ("id", "query"):
        if not isinstance(record.get(key), str) or not record[key]:
            raise WorkloadFormatError(line_number, f"missing or empty '{key}'")
    frequency = record.get("frequency", 1)
    if not isinstance(frequency, int) or isinstance(frequency, bool) or frequency < 1:
        raise WorkloadFormatError(line_number, "'frequency' must be a positive integer")
    try:
        query = parse_query(record["query"], record["id"], prefixes)
    except InputError as exc:
        raise WorkloadFormatError(line_number, str(exc)) from exc
    return query, frequency


def read_workload(lines: Iterable[str], prefixes: Optional[Mapping[str, str]] = None) -> Workload:
    workload = Workload()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        query, frequency = parse_workload_line(line, line_number, prefixes)
        try:
            workload.register(query, frequency)
        except InputError as exc:
            raise WorkloadFormatError(line_number, str(exc)) from exc
    return workload


def load_workload(path: Union[str, Path], prefixes: Optional[Mapping[str, str]] = None) -> Workload:
    with open(path, "r", encoding="utf-8") as f:
        return read_workload(f, prefixes)


def workload_lines(queries: Iterable[Tuple[str, str, int]]) -> str:
    """JSONL text for (id, query text, frequency) records"""
    return "".join(
        json.dumps({"id": qid, "query": text, "frequency": freq}) + "\n"
        for qid, text, freq in queries
    )


