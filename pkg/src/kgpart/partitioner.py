"""
Workload-aware partitioning.

Builds the initial partition from clustered workload features and adapts it
when the workload changes: key-feature scoring, balanced assignment, a
placement search on the simulated join cost, proximity placement of
unclustered units, migration planning and the accept-or-revert gate.

A *unit* is anything the partition places as a whole: a workload feature
(P or PO) or an orphan predicate, which is represented by its P feature.
"""

import json
import logging
from collections import ChainMap, defaultdict
from dataclasses import dataclass, field, replace
from typing import (
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import networkx as nx

from .clustering import FeatureGroup, Linkage, cluster_workload
from .config import DEFAULT_CUT, DEFAULT_K, DEFAULT_TOLERANCE, CostModel, EngineConfig, Weights
from .errors import (
    FeatureNotResident,
    InfeasibleBalance,
    InputError,
    PartitionMismatch,
    TooFewFeatures,
)
from .kg_model import KnowledgeGraph, parse_term
from .query_analyzer import QueryFeatures, QuerySpec, extract_features
from .terms import Feature, FeatureKind, JoinKind, Term, TriplePattern, Variable
from .workload import Workload

logger = logging.getLogger(__name__)

Units = Mapping[Feature, int]
ScoreTable = Union[Mapping[Tuple[Feature, int], float], Callable[[Feature, int, Units], float]]


@dataclass
class Partition:
    """Shard assignment of workload features and orphan predicates"""

    k: int
    assignment: Dict[Feature, int]
    orphan: Dict[Term, int] = field(default_factory=dict)
    version: int = 1
    epoch: int = 0
    frequencies: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for unit, shard in self.units().items():
            if not 0 <= shard < self.k:
                raise ValueError(f"{unit} assigned to shard {shard} outside 0..{self.k - 1}")
        for predicate in self.orphan:
            if Feature.p(predicate) in self.assignment:
                raise ValueError(f"predicate {predicate} is both a feature and an orphan")

    def units(self) -> Dict[Feature, int]:
        units = dict(self.assignment)
        for predicate, shard in self.orphan.items():
            units[Feature.p(predicate)] = shard
        return units

    def is_orphan_unit(self, unit: Feature) -> bool:
        return unit.kind is FeatureKind.P and unit.predicate in self.orphan

    def shard_of(self, feature: Feature) -> Optional[int]:
        """Shard holding the feature's triples (a PO falls back to its parent)"""
        return resident(self.units(), feature)

    def owner_shard(self, predicate: Term, obj: Term) -> Optional[int]:
        """Shard owning a triple with this predicate and object (PO > P > orphan)"""
        shard = self.assignment.get(Feature.po(predicate, obj))
        if shard is None:
            shard = self.assignment.get(Feature.p(predicate))
        if shard is None:
            shard = self.orphan.get(predicate)
        return shard

    def with_units(self, units: Units, **changes: object) -> "Partition":
        """Same inventory, shards taken from units"""
        assignment = {f: units[f] for f in self.assignment}
        orphan = {p: units[Feature.p(p)] for p in self.orphan}
        return replace(self, assignment=assignment, orphan=orphan, **changes)

    def copy(self) -> "Partition":
        return replace(
            self,
            assignment=dict(self.assignment),
            orphan=dict(self.orphan),
            frequencies=dict(self.frequencies),
        )

    def to_dict(self) -> Dict[str, object]:
        return {
            "version": self.version,
            "k": self.k,
            "epoch": self.epoch,
            "frequencies": dict(sorted(self.frequencies.items())),
            "assignment": [
                {"feature": f.encode(), "shard": self.assignment[f]}
                for f in sorted(self.assignment, key=Feature.sort_key)
            ],
            "orphan": [
                {"predicate": p.n3(), "shard": self.orphan[p]}
                for p in sorted(self.orphan, key=Term.n3)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "Partition":
        try:
            assignment = {
                decode_feature(item["feature"]): int(item["shard"])  # type: ignore[index]
                for item in data["assignment"]  # type: ignore[union-attr]
            }
            orphan = {
                parse_term(item["predicate"]): int(item["shard"])  # type: ignore[index]
                for item in data.get("orphan", [])  # type: ignore[union-attr]
            }
            return cls(
                k=int(data["k"]),  # type: ignore[arg-type]
                assignment=assignment,
                orphan=orphan,
                version=int(data.get("version", 1)),  # type: ignore[arg-type]
                epoch=int(data.get("epoch", 0)),  # type: ignore[arg-type]
                frequencies={str(k): int(v) for k, v in dict(data.get("frequencies", {})).items()},  # type: ignore[call-overload]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PartitionMismatch(f"invalid partition document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PartitionMismatch(f"invalid partition JSON: {exc.msg}") from exc
        return cls.from_dict(data)


def decode_feature(text: str) -> Feature:
    """Inverse of Feature.encode"""
    kind, _, rest = text.partition("|")
    if kind == FeatureKind.P.value:
        return Feature.p(parse_term(rest))
    if kind == FeatureKind.PO.value:
        end = rest.find(">|")
        if end < 0:
            raise ValueError(f"cannot decode feature {text!r}")
        return Feature.po(parse_term(rest[: end + 1]), parse_term(rest[end + 2 :]))
    raise ValueError(f"unknown feature kind in {text!r}")


def resident(units: Units, feature: Feature) -> Optional[int]:
    shard = units.get(feature)
    if shard is None and feature.kind is FeatureKind.PO:
        shard = units.get(feature.parent)
    return shard


@dataclass(frozen=True)
class Move:
    feature: Feature
    from_shard: int
    to_shard: int
    triple_count: int


@dataclass(frozen=True)
class MigrationPlan:
    moves: Tuple[Move, ...] = ()
    predicted_cost_before: float = 0.0
    predicted_cost_after: float = 0.0

    def __post_init__(self) -> None:
        seen: Set[Feature] = set()
        for move in self.moves:
            if move.from_shard == move.to_shard:
                raise ValueError(f"move of {move.feature} does not change shard")
            if move.feature in seen:
                raise ValueError(f"{move.feature} moved twice")
            seen.add(move.feature)

    def __len__(self) -> int:
        return len(self.moves)

    @property
    def triples_moved(self) -> int:
        return sum(m.triple_count for m in self.moves)

    def to_json(self) -> str:
        payload = {
            "predicted_cost_before": self.predicted_cost_before,
            "predicted_cost_after": self.predicted_cost_after,
            "moves": [
                {
                    "feature": m.feature.encode(),
                    "from": m.from_shard,
                    "to": m.to_shard,
                    "triples": m.triple_count,
                }
                for m in self.moves
            ],
        }
        return json.dumps(payload, indent=2) + "\n"


@dataclass(frozen=True)
class FeatureStats:
    feature: Feature
    shard: int
    p_c: int
    q_c: int
    s_c: float
    p_t: int
    q_t: int
    s_t: float

    def __post_init__(self) -> None:
        if min(self.p_c, self.q_c, self.p_t, self.q_t) < 0:
            raise ValueError("counts must be non-negative")
        if not (0 <= self.s_c <= 1 and 0 <= self.s_t <= 1):
            raise ValueError("size ratios must lie in [0, 1]")


def unit_sizes(graph: KnowledgeGraph, partition: Partition) -> Dict[Feature, int]:
    """Triples owned by every unit of the partition"""
    owned = graph.group_by_owner(partition.assignment)
    sizes = {unit: 0 for unit in partition.units()}
    for unit, triple_ids in owned.items():
        sizes[unit] = len(triple_ids)
    return sizes


def shard_loads(units: Units, sizes: Mapping[Feature, int], k: int) -> List[int]:
    loads = [0] * k
    for unit, shard in units.items():
        loads[shard] += sizes.get(unit, 0)
    return loads


def capacity(total: int, k: int, tolerance: float) -> float:
    return (1 + tolerance) * total / k


def is_balanced(loads: Sequence[int], tolerance: float) -> bool:
    if not loads:
        return True
    return max(loads) <= capacity(sum(loads), len(loads), tolerance) + 1e-9


def check_partition(graph: KnowledgeGraph, partition: Partition) -> None:
    """Every predicate of the graph must have an owner"""
    units = partition.units()
    missing = [p for p in graph.predicates() if Feature.p(p) not in units]
    if missing:
        raise PartitionMismatch(
            f"{len(missing)} predicate(s) have no shard, e.g. {missing[0].n3()}"
        )


def ownership_scan(graph: KnowledgeGraph, partition: Partition) -> Dict[int, int]:
    """Owning shard of every triple by a full scan"""
    owners: Dict[int, int] = {}
    for triple_id, triple in graph.triples():
        shard = partition.owner_shard(triple.predicate, triple.object)
        if shard is None:
            raise PartitionMismatch(f"triple {triple_id} has no owning shard")
        owners[triple_id] = shard
    return owners


def primary_shard(qf: QueryFeatures, units: Units) -> int:
    """Shard holding most of the query's features; ties to the lowest id"""
    counts: Dict[int, int] = defaultdict(int)
    for feature in qf.features:
        shard = resident(units, feature)
        if shard is not None:
            counts[shard] += 1
    if not counts:
        return 0
    return min(counts, key=lambda s: (-counts[s], s))


def join_counts(qf: QueryFeatures, units: Units) -> Tuple[int, int]:
    """(distributed, total) joins of one query under a placement.

    Joins between featured patterns are counted once per JoinFeature;
    joins touching a feature-less pattern are counted per pattern pair,
    with the feature-less side on the primary shard.
    """
    primary = primary_shard(qf, units)

    def where(feature: Optional[Feature]) -> int:
        if feature is None:
            return primary
        shard = resident(units, feature)
        return primary if shard is None else shard

    distributed = sum(1 for j in qf.joins if where(j.left) != where(j.right))
    total = len(qf.joins)
    for pj in qf.pattern_joins:
        left, right = qf.pattern_features[pj.left], qf.pattern_features[pj.right]
        if left is not None and right is not None:
            continue
        total += 1
        if where(left) != where(right):
            distributed += 1
    return distributed, total


def distributed_joins(q: Union[QuerySpec, QueryFeatures], p: Partition) -> int:
    qf = q if isinstance(q, QueryFeatures) else extract_features(q)
    return join_counts(qf, p.units())[0]


def weighted_distributed_joins(workload: Workload, p: Partition, query_ids: Optional[Iterable[str]] = None) -> int:
    units = p.units()
    ids = list(workload.entries) if query_ids is None else list(query_ids)
    return sum(
        workload.entries[qid].frequency * join_counts(workload.entries[qid].features, units)[0]
        for qid in ids
    )


def pattern_sources(
    pattern: TriplePattern,
    units: Units,
    primary: int,
    k: int,
    carved: Optional[Iterable[int]] = None,
) -> Tuple[int, Tuple[int, ...]]:
    """Home shard of a pattern and every shard its matches are read from.

    A bound object reads the owning unit (PO > P > orphan). A free object
    reads the P unit plus every PO unit carved out of the predicate; pass
    `carved` to skip scanning units for those. A free predicate reads
    every shard from the primary node.
    """
    predicate = pattern.predicate
    if isinstance(predicate, Variable):
        return primary, tuple(range(k))
    if isinstance(pattern.object, Term):
        shard = units.get(Feature.po(predicate, pattern.object))
        if shard is None:
            shard = units.get(Feature.p(predicate))
        home = primary if shard is None else shard
        return home, (home,)
    if carved is None:
        carved = {s for f, s in units.items() if f.kind is FeatureKind.PO and f.predicate == predicate}
    carved = set(carved)
    base = units.get(Feature.p(predicate))
    if base is not None:
        home = base
    elif carved:
        home = min(carved)
    else:
        home = primary
    return home, tuple(sorted({home} | carved))


def placement_joins(
    qf: QueryFeatures,
    patterns: Sequence[TriplePattern],
    units: Units,
    k: int,
    carved: Optional[Callable[[Term], Iterable[int]]] = None,
) -> Tuple[int, int]:
    """(local, distributed) joins of a query as its federated rewrite runs it.

    Pattern pairs on different home shards and every extra shard a pattern
    fans out to count as distributed joins.
    """
    primary = primary_shard(qf, units)
    homes: List[int] = []
    fan_out = 0
    for pattern in patterns:
        shards = carved(pattern.predicate) if carved is not None and isinstance(pattern.predicate, Term) else None
        home, sources = pattern_sources(pattern, units, primary, k, shards)
        homes.append(home)
        fan_out += len(sources) - 1
    local = sum(1 for join in qf.pattern_joins if homes[join.left] == homes[join.right])
    return local, len(qf.pattern_joins) - local + fan_out


def key_features(group: FeatureGroup, workload: Workload) -> List[Feature]:
    """Group features by frequency-weighted usage, descending"""
    usage = workload.feature_usage()
    return sorted(group.features, key=lambda f: (-usage.get(f, 0), f.encode()))


def _join_graph(qf: QueryFeatures) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(qf.features)
    for join in qf.joins:
        if join.left == join.right:
            continue
        graph.add_edge(join.left, join.right)
        if join.kind is not JoinKind.OSJ:
            graph.add_edge(join.right, join.left)
    return graph


def _hops(graph: nx.DiGraph, source: Feature, max_hops: int) -> Tuple[Set[Feature], int]:
    """Peers reachable from source and the number of hop sequences reaching them"""
    if source not in graph:
        return set(), 0
    targets = set(graph) - {source}
    if not targets:
        return set(), 0
    peers: Set[Feature] = set()
    sequences = 0
    for path in nx.all_simple_paths(graph, source, targets, cutoff=max_hops):
        peers.add(path[-1])
        sequences += 1
    return peers, sequences


class ScoringContext:
    """Workload statistics needed to score units against candidate shards"""

    def __init__(
        self,
        workload: Workload,
        sizes: Mapping[Feature, int],
        k: int,
        weights: Weights,
        join_term: str = "min",
        max_hops: int = 3,
    ):
        self.workload = workload
        self.sizes = sizes
        self.k = k
        self.weights = weights
        self.join_term = join_term
        self.max_hops = max_hops
        self.total = sum(sizes.values())
        self.join_graphs = {qid: _join_graph(e.features) for qid, e in workload.entries.items()}
        self.referencing: Dict[Feature, List[str]] = defaultdict(list)
        for qid, entry in workload.entries.items():
            for feature in entry.features.features:
                self.referencing[feature].append(qid)
        self._totals: Dict[Feature, Tuple[int, int]] = {}

    def _total_hops(self, feature: Feature) -> Tuple[int, int]:
        if feature not in self._totals:
            peers: Set[Feature] = set()
            sequences = 0
            for qid in self.referencing.get(feature, ()):
                found, count = _hops(self.join_graphs[qid], feature, self.max_hops)
                peers |= found
                sequences += count
            self._totals[feature] = (len(peers), sequences)
        return self._totals[feature]

    def stats(self, feature: Feature, shard: int, units: Units) -> FeatureStats:
        """Statistics of feature as if it were placed on shard"""
        peers: Set[Feature] = set()
        sequences = 0
        for qid in self.referencing.get(feature, ()):
            graph = self.join_graphs[qid]
            local = [n for n in graph if n == feature or resident(units, n) == shard]
            found, count = _hops(graph.subgraph(local), feature, self.max_hops)
            peers |= found
            sequences += count
        size = self.sizes.get(feature, 0)
        load = sum(
            self.sizes.get(u, 0) for u, s in units.items() if s == shard and u != feature
        ) + size
        p_t, q_t = self._total_hops(feature)
        return FeatureStats(
            feature=feature,
            shard=shard,
            p_c=len(peers),
            q_c=sequences,
            s_c=size / load if load else 0.0,
            p_t=p_t,
            q_t=q_t,
            s_t=size / self.total if self.total else 0.0,
        )

    def join_term_value(self, feature: Feature, shard: int, units: Units) -> float:
        """Frequency-weighted join reward of placing feature on shard"""
        hypothetical = ChainMap({feature: shard}, units)
        rows = []
        for qid in self.referencing.get(feature, ()):
            entry = self.workload.entries[qid]
            distributed, total = join_counts(entry.features, hypothetical)
            rows.append((distributed, total, entry.frequency, qid))
        if not rows:
            return 0.0
        w = self.weights.w_join
        if self.join_term == "sum":
            return w * sum(f * (t - d) for d, t, f, _ in rows)
        d, t, f, _ = min(rows, key=lambda r: (r[0], -r[2] * (r[1] - r[0]), r[3]))
        if self.join_term == "literal":
            return w * f * d
        return w * f * (t - d)

    def score(self, feature: Feature, shard: int, units: Units) -> float:
        stats = self.stats(feature, shard, units)
        return s_k(stats, self.weights) + self.join_term_value(feature, shard, units)


def s_k(stats: FeatureStats, weights: Weights) -> float:
    return (
        stats.p_c * weights.w1
        + stats.q_c * weights.w2
        + stats.s_c * weights.w3
        + stats.p_t * weights.w4
        + stats.q_t * weights.w5
        + stats.s_t * weights.w6
    )


def feature_stats(
    f: Feature,
    shard: int,
    graph: KnowledgeGraph,
    workload: Workload,
    partition: Partition,
    max_hops: int = 3,
) -> FeatureStats:
    units = partition.units()
    if resident(units, f) != shard:
        raise FeatureNotResident(f, shard)
    context = ScoringContext(workload, unit_sizes(graph, partition), partition.k, Weights(), max_hops=max_hops)
    return context.stats(f, shard, units)


def score_feature(
    f: Feature,
    stats: FeatureStats,
    weights: Weights,
    workload: Workload,
    partition: Partition,
    join_term: str = "min",
    sizes: Optional[Mapping[Feature, int]] = None,
) -> float:
    """S_K plus the join term for f placed on stats.shard"""
    context = ScoringContext(workload, sizes or {}, partition.k, weights, join_term)
    return s_k(stats, weights) + context.join_term_value(f, stats.shard, partition.units())


def _group_mass(group: FeatureGroup, sizes: Mapping[Feature, int]) -> int:
    return sum(sizes.get(f, 0) for f in group.features)


def _ordered_groups(groups: Sequence[FeatureGroup], sizes: Mapping[Feature, int]) -> List[FeatureGroup]:
    return sorted(groups, key=lambda g: (-_group_mass(g, sizes), g.group_id))


def _argmin_load(loads: Sequence[int]) -> int:
    return min(range(len(loads)), key=lambda s: (loads[s], s))


def _choose_shard(
    feature: Feature,
    size: int,
    score: Callable[[Feature, int, Units], float],
    units: Units,
    loads: Sequence[int],
    cap: float,
    candidates: Iterable[int],
    current: Optional[int] = None,
) -> int:
    """Best-scoring candidate with room for the feature; loads exclude it"""
    ranked = sorted(candidates, key=lambda s: (-score(feature, s, units), s))
    for shard in ranked:
        if shard == current or loads[shard] + size <= cap + 1e-9:
            return shard
    raise InfeasibleBalance(feature, cap)


def _score_callable(scores: ScoreTable) -> Callable[[Feature, int, Units], float]:
    if callable(scores):
        return scores
    table = scores
    return lambda f, s, _units: table.get((f, s), 0.0)


def _balance_units(
    score: Callable[[Feature, int, Units], float],
    groups: Sequence[FeatureGroup],
    units: Dict[Feature, int],
    sizes: Mapping[Feature, int],
    k: int,
    cap: float,
    usage: Mapping[Feature, int],
) -> Dict[Feature, int]:
    loads = shard_loads(units, sizes, k)
    done: Set[Feature] = set()
    for group in _ordered_groups(groups, sizes):
        for feature in sorted(group.features, key=lambda f: (-usage.get(f, 0), f.encode())):
            if feature in done:
                continue
            done.add(feature)
            size = sizes.get(feature, 0)
            current = units.pop(feature, None)
            if current is not None:
                loads[current] -= size
            shard = _choose_shard(feature, size, score, units, loads, cap, range(k), current)
            units[feature] = shard
            loads[shard] += size
            if shard != current:
                logger.debug("balance: %s -> shard %d", feature, shard)
    return units


def balance_partition(
    scores: ScoreTable,
    groups: Sequence[FeatureGroup],
    all_features: Mapping[Feature, int],
    partition: Partition,
    tolerance: float = DEFAULT_TOLERANCE,
    usage: Optional[Mapping[Feature, int]] = None,
) -> Partition:
    """Assign every group feature to its best-scoring shard with capacity.

    `all_features` maps every unit of the inventory to its triple count;
    capacity is (1 + tolerance) times the mean shard size. Group features
    not yet in the partition are added to its assignment.
    """
    units = partition.units()
    cap = capacity(sum(all_features.values()), partition.k, tolerance)
    units = _balance_units(
        _score_callable(scores), groups, units, all_features, partition.k, cap, usage or {}
    )
    assignment = {f: s for f, s in units.items() if not partition.is_orphan_unit(f)}
    orphan = {p: units[Feature.p(p)] for p in partition.orphan}
    return replace(partition, assignment=assignment, orphan=orphan)


def _proximity_units(
    units: Dict[Feature, int],
    unclustered: Iterable[Feature],
    graph: KnowledgeGraph,
    workload: Workload,
    sizes: Mapping[Feature, int],
    k: int,
    cap: float,
    previous: Optional[Units] = None,
) -> Dict[Feature, int]:
    """Place pending units on the shard of their closest clustered unit.

    Units without a neighbour that fits stay on their `previous` shard when
    it has room, otherwise they go to the least loaded shard.
    """
    pending = sorted(set(unclustered), key=Feature.sort_key)
    if not pending:
        return units
    previous = previous or {}
    pending_set = set(pending)
    clustered = {u for u in units if u not in pending_set}

    owners = graph.group_by_owner(u for u in set(units) | pending_set if u.kind is FeatureKind.PO)
    subjects: Dict[Feature, Set[int]] = {
        unit: {graph.ids(t)[0] for t in triple_ids} for unit, triple_ids in owners.items()
    }
    by_subject: Dict[int, Set[Feature]] = defaultdict(set)
    for unit in clustered:
        for subject in subjects.get(unit, ()):
            by_subject[subject].add(unit)

    co_joined: Dict[Feature, Dict[Feature, int]] = defaultdict(lambda: defaultdict(int))
    for entry in workload.entries.values():
        for join in entry.features.joins:
            if join.left != join.right:
                co_joined[join.left][join.right] += entry.frequency
                co_joined[join.right][join.left] += entry.frequency

    for unit in pending:
        units.pop(unit, None)
    loads = shard_loads(units, sizes, k)

    leftovers: List[Feature] = []
    for unit in pending:
        proximity: Dict[Feature, int] = defaultdict(int)
        for subject in subjects.get(unit, ()):
            for neighbour in by_subject.get(subject, ()):
                proximity[neighbour] += 1
        for neighbour, weight in co_joined.get(unit, {}).items():
            if neighbour in clustered:
                proximity[neighbour] += weight
        size = sizes.get(unit, 0)
        if proximity:
            best = min(proximity, key=lambda n: (-proximity[n], n.encode()))
            shard = units[best]
            if loads[shard] + size <= cap + 1e-9:
                units[unit] = shard
                loads[shard] += size
                logger.debug("proximity: %s joins %s on shard %d", unit, best, shard)
                continue
        leftovers.append(unit)

    for unit in sorted(leftovers, key=lambda u: (-sizes.get(u, 0), u.encode())):
        size = sizes.get(unit, 0)
        shard = previous.get(unit)
        if shard is None or loads[shard] + size > cap + 1e-9:
            shard = _argmin_load(loads)
        units[unit] = shard
        loads[shard] += size
    return units


def proximity_place(
    partition: Partition,
    unclustered: Iterable[Feature],
    graph: KnowledgeGraph,
    workload: Workload,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Partition:
    """Place unclustered units next to the clustered unit they are closest to.

    Units already known to the partition keep their kind; new P units whose
    predicate is not a workload feature become orphans.
    """
    unclustered = list(unclustered)
    if not unclustered:
        return partition
    workload_features = workload.features()
    known = partition.units()
    new_units = [u for u in unclustered if u not in known]
    draft = replace(
        partition,
        assignment={
            **partition.assignment,
            **{u: 0 for u in new_units if u.kind is FeatureKind.PO or u in workload_features},
        },
        orphan={
            **partition.orphan,
            **{
                u.predicate: 0
                for u in new_units
                if u.kind is FeatureKind.P and u not in workload_features
            },
        },
    )
    sizes = unit_sizes(graph, draft)
    cap = capacity(sum(sizes.values()), partition.k, tolerance)
    units = _proximity_units(known, unclustered, graph, workload, sizes, partition.k, cap)
    return draft.with_units(units)


def _relieve_overload(
    units: Dict[Feature, int],
    sizes: Mapping[Feature, int],
    k: int,
    cap: float,
    usage: Mapping[Feature, int],
) -> Dict[Feature, int]:
    """Move the least-used units off shards above capacity where room exists"""
    loads = shard_loads(units, sizes, k)
    for shard in sorted(range(k), key=lambda s: (-loads[s], s)):
        if loads[shard] <= cap + 1e-9:
            continue
        residents = sorted(
            (u for u, s in units.items() if s == shard and sizes.get(u, 0) > 0),
            key=lambda u: (usage.get(u, 0), -sizes.get(u, 0), u.encode()),
        )
        for unit in residents:
            if loads[shard] <= cap + 1e-9:
                break
            size = sizes[unit]
            target = _argmin_load(loads)
            if target == shard or loads[target] + size > cap + 1e-9:
                continue
            units[unit] = target
            loads[shard] -= size
            loads[target] += size
            logger.debug("relieve: %s shard %d -> %d", unit, shard, target)
    return units


class PlacementSearch:
    """Hill climbing over unit placements on the simulated join cost.

    A move relocates one unit, or every unit a query reads, to another
    shard. Each round applies the move that lowers the workload's join cost
    the most while the target shard stays within capacity; queries in
    `protected` never gain distributed joins.
    """

    def __init__(
        self,
        workload: Workload,
        sizes: Mapping[Feature, int],
        k: int,
        cap: float,
        cost_model: Optional[CostModel] = None,
        weighted: bool = True,
        protected: Iterable[str] = (),
        max_rounds: Optional[int] = None,
    ):
        self.sizes = sizes
        self.k = k
        self.cap = cap
        self.cost_model = cost_model or CostModel()
        self.queries = [
            (entry.features, entry.query.patterns, entry.frequency if weighted else 1)
            for _, entry in sorted(workload.entries.items())
        ]
        protected = set(protected)
        self.protected = {i for i, qid in enumerate(sorted(workload.entries)) if qid in protected}
        self.inventory = sorted(sizes, key=Feature.sort_key)
        self.max_rounds = 4 * len(self.inventory) + 8 if max_rounds is None else max_rounds

        self.carved_units: Dict[Term, List[Feature]] = defaultdict(list)
        for unit in self.inventory:
            if unit.kind is FeatureKind.PO:
                self.carved_units[unit.predicate].append(unit)

        self.touching: Dict[Feature, Set[int]] = defaultdict(set)
        self.reads: List[List[Feature]] = []
        for i, (_, patterns, _) in enumerate(self.queries):
            read: Set[Feature] = set()
            for pattern in patterns:
                if not isinstance(pattern.predicate, Term):
                    continue
                for unit in self.carved_units.get(pattern.predicate, ()):
                    if isinstance(pattern.object, Variable) or unit.object == pattern.object:
                        self.touching[unit].add(i)
                self.touching[Feature.p(pattern.predicate)].add(i)
                read.update(self._pattern_units(pattern))
            self.reads.append(sorted(read, key=Feature.sort_key))

    def _pattern_units(self, pattern: TriplePattern) -> List[Feature]:
        predicate = pattern.predicate
        parent = Feature.p(predicate)  # type: ignore[arg-type]
        if isinstance(pattern.object, Term):
            po = Feature.po(predicate, pattern.object)  # type: ignore[arg-type]
            if po in self.sizes:
                return [po]
            return [parent] if parent in self.sizes else []
        own = [parent] if parent in self.sizes else []
        return own + list(self.carved_units.get(predicate, ()))  # type: ignore[arg-type]

    def query_cost(self, i: int, units: Units) -> Tuple[float, int]:
        """Weighted join cost and distributed joins of query i"""
        qf, patterns, weight = self.queries[i]

        def carved(predicate: Term) -> List[int]:
            return [units[u] for u in self.carved_units.get(predicate, ())]

        local, distributed = placement_joins(qf, patterns, units, self.k, carved)
        return weight * self.cost_model.cost(distributed, local, 0), distributed

    def objective(self, units: Units) -> float:
        return sum(self.query_cost(i, units)[0] for i in range(len(self.queries)))

    def _moves(self, units: Units) -> Iterator[Tuple[Tuple[Feature, ...], int]]:
        for unit in self.inventory:
            for shard in range(self.k):
                if shard != units[unit]:
                    yield (unit,), shard
        for read in self.reads:
            for shard in range(self.k):
                moving = tuple(u for u in read if units[u] != shard)
                if len(moving) > 1:
                    yield moving, shard

    def _evaluate(
        self,
        units: Dict[Feature, int],
        loads: Sequence[int],
        costs: Mapping[int, Tuple[float, int]],
        moving: Tuple[Feature, ...],
        shard: int,
    ) -> Optional[Tuple[float, Dict[int, Tuple[float, int]]]]:
        incoming = sum(self.sizes.get(u, 0) for u in moving)
        if incoming and loads[shard] + incoming > self.cap + 1e-9:
            return None
        affected = sorted(set().union(*(self.touching.get(u, set()) for u in moving)))
        if not affected:
            return None
        saved = {u: units[u] for u in moving}
        units.update({u: shard for u in moving})
        try:
            results: Dict[int, Tuple[float, int]] = {}
            for i in affected:
                results[i] = self.query_cost(i, units)
                if i in self.protected and results[i][1] > costs[i][1]:
                    return None
        finally:
            units.update(saved)
        delta = sum(results[i][0] - costs[i][0] for i in affected)
        return delta, results

    def improve(self, units: Units) -> Dict[Feature, int]:
        units = dict(units)
        loads = shard_loads(units, self.sizes, self.k)
        costs = {i: self.query_cost(i, units) for i in range(len(self.queries))}
        for _ in range(self.max_rounds):
            best: Optional[Tuple[float, Tuple[Feature, ...], int, Dict[int, Tuple[float, int]]]] = None
            for moving, shard in self._moves(units):
                found = self._evaluate(units, loads, costs, moving, shard)
                if found is None or found[0] >= -1e-9:
                    continue
                if best is None or found[0] < best[0] - 1e-9:
                    best = (found[0], moving, shard, found[1])
            if best is None:
                break
            delta, moving, shard, results = best
            for unit in moving:
                size = self.sizes.get(unit, 0)
                loads[units[unit]] -= size
                loads[shard] += size
                units[unit] = shard
            costs.update(results)
            logger.debug("search: %d unit(s) -> shard %d, cost %+.4f", len(moving), shard, delta)
        return units


def refine(partition: Partition, features: Iterable[Feature]) -> Partition:
    """Register new features on the shard already holding their triples.

    Metadata only: a new P feature takes over its orphan predicate, a new PO
    feature is carved out of its parent's shard. Nothing moves.
    """
    units = partition.units()
    assignment = dict(partition.assignment)
    orphan = dict(partition.orphan)
    for feature in sorted(set(features) - set(assignment), key=Feature.sort_key):
        if feature.kind is FeatureKind.P and feature.predicate in orphan:
            shard = orphan.pop(feature.predicate)
        else:
            shard = resident(units, feature)
        assignment[feature] = 0 if shard is None else shard
    return replace(partition, assignment=assignment, orphan=orphan)


def plan_migration(
    before: Partition,
    after: Partition,
    sizes: Mapping[Feature, int],
    cost_before: float = 0.0,
    cost_after: float = 0.0,
) -> MigrationPlan:
    """Moves turning before into after; both must share one inventory"""
    old, new = before.units(), after.units()
    if set(old) != set(new):
        raise PartitionMismatch("partitions do not share a unit inventory; refine first")
    moves = tuple(
        Move(unit, old[unit], new[unit], sizes.get(unit, 0))
        for unit in sorted(old, key=Feature.sort_key)
        if old[unit] != new[unit]
    )
    return MigrationPlan(moves, cost_before, cost_after)


def initial_partition(
    graph: KnowledgeGraph,
    workload: Workload,
    k: int = DEFAULT_K,
    cut_d: float = DEFAULT_CUT,
    weights: Optional[Weights] = None,
    *,
    linkage: Linkage = Linkage.SINGLE,
    tolerance: float = DEFAULT_TOLERANCE,
    join_term: str = "min",
    max_hops: int = 3,
) -> Partition:
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    predicates = graph.predicates()
    if len(predicates) < k:
        raise TooFewFeatures(len(predicates), k)

    features = workload.features()
    skeleton = Partition(
        k=k,
        assignment={f: 0 for f in features},
        orphan={p: 0 for p in predicates if Feature.p(p) not in features},
    )
    sizes = unit_sizes(graph, skeleton)
    cap = capacity(sum(sizes.values()), k, tolerance)
    usage = workload.feature_usage()
    _, groups = cluster_workload(workload, linkage, cut_d)
    context = ScoringContext(workload, sizes, k, weights or Weights(), join_term, max_hops)

    units: Dict[Feature, int] = {}
    loads = [0] * k
    homes: Dict[Feature, List[int]] = defaultdict(list)
    for group in _ordered_groups(groups, sizes):
        home = _argmin_load(loads)
        for feature in key_features(group, workload):
            homes[feature].append(home)
            if feature in units:
                continue
            size = sizes.get(feature, 0)
            if loads[home] + size <= cap + 1e-9:
                shard = home
            else:
                shard = _choose_shard(feature, size, context.score, units, loads, cap, range(k))
            units[feature] = shard
            loads[shard] += size
        logger.debug("group %d (%d features) homed on shard %d", group.group_id, len(group.features), home)

    for feature in sorted(homes, key=lambda f: (-usage.get(f, 0), f.encode())):
        if len(set(homes[feature])) < 2:
            continue
        size = sizes.get(feature, 0)
        current = units.pop(feature)
        loads[current] -= size
        candidates = sorted(set(homes[feature]) | {current})
        shard = _choose_shard(feature, size, context.score, units, loads, cap, candidates, current)
        units[feature] = shard
        loads[shard] += size

    orphans = [Feature.p(p) for p in skeleton.orphan]
    units = _proximity_units(units, orphans, graph, workload, sizes, k, cap)
    units = _relieve_overload(units, sizes, k, cap, usage)

    partition = skeleton.with_units(units, epoch=workload.epoch, frequencies=workload.frequencies())
    loads = shard_loads(partition.units(), sizes, k)
    logger.info(
        "Initial partition: %d features, %d orphan predicates, shard sizes %s",
        len(partition.assignment),
        len(partition.orphan),
        loads,
    )
    return partition


@dataclass(frozen=True)
class AdaptResult:
    partition: Partition
    plan: MigrationPlan
    report_before: object
    report_after: object
    status: str
    reason: str = ""
    refined: Optional[Partition] = None

    @property
    def committed(self) -> bool:
        return self.status == "committed"


CostFunction = Callable[[KnowledgeGraph, Workload, Partition], object]


def _default_cost_fn(config: EngineConfig) -> CostFunction:
    from .federation import simulate

    def cost(graph: KnowledgeGraph, workload: Workload, partition: Partition) -> object:
        return simulate(graph, workload, partition, config.cost)

    return cost


def _gate_value(report: object, metric: str) -> float:
    return report.mean_cost if metric == "mean" else report.weighted_average  # type: ignore[attr-defined]


def adapt(
    partition: Partition,
    graph: KnowledgeGraph,
    workload: Workload,
    config: Optional[EngineConfig] = None,
    cost_fn: Optional[CostFunction] = None,
) -> AdaptResult:
    """Propose a repartitioning for the current workload and keep it only if it pays off"""
    config = config or EngineConfig()
    cost_fn = cost_fn or _default_cost_fn(config)
    frequencies = workload.frequencies()

    if partition.frequencies == frequencies:
        report = cost_fn(graph, workload, partition)
        cost = _gate_value(report, config.gate_metric)
        logger.info("Workload unchanged since version %d; nothing to adapt", partition.version)
        return AdaptResult(partition, MigrationPlan((), cost, cost), report, report, "no-op", "workload unchanged")

    refined = refine(partition, workload.features())
    sizes = unit_sizes(graph, refined)
    k = refined.k
    cap = capacity(sum(sizes.values()), k, config.balance_tolerance)
    usage = workload.feature_usage()
    _, groups = cluster_workload(workload, config.linkage, config.cut_d)
    context = ScoringContext(workload, sizes, k, config.weights, config.join_term, config.max_hops)
    risen = [qid for qid, frequency in frequencies.items() if frequency > partition.frequencies.get(qid, frequency)]
    search = PlacementSearch(workload, sizes, k, cap, config.cost, config.gate_metric != "mean", risen)

    start = refined.units()
    units = _balance_units(context.score, groups, dict(start), sizes, k, cap, usage)
    searched = [search.improve(units)]
    if is_balanced(shard_loads(start, sizes, k), config.balance_tolerance):
        searched.append(search.improve(start))
    units = min(searched, key=search.objective)
    orphans = [Feature.p(p) for p in refined.orphan]
    units = _proximity_units(units, orphans, graph, workload, sizes, k, cap, previous=start)
    units = _relieve_overload(units, sizes, k, cap, usage)
    candidate = refined.with_units(
        units,
        version=partition.version + 1,
        epoch=workload.epoch,
        frequencies=frequencies,
    )

    report_before = cost_fn(graph, workload, refined)
    report_after = cost_fn(graph, workload, candidate)
    before = _gate_value(report_before, config.gate_metric)
    after = _gate_value(report_after, config.gate_metric)
    plan = plan_migration(refined, candidate, sizes, before, after)

    reason = ""
    if after >= before:
        reason = f"cost did not improve ({before:.4f} -> {after:.4f})"
    elif not is_balanced(shard_loads(candidate.units(), sizes, k), config.balance_tolerance):
        reason = "tentative partition violates the balance constraint"
    else:
        for qid, frequency in frequencies.items():
            if frequency <= partition.frequencies.get(qid, frequency):
                continue
            gained = (
                report_after.by_query[qid].distributed_joins  # type: ignore[attr-defined]
                > report_before.by_query[qid].distributed_joins  # type: ignore[attr-defined]
            )
            if gained:
                reason = f"{qid} became more frequent but would gain distributed joins"
                break

    if reason:
        logger.info("Reverting tentative partition: %s", reason)
        return AdaptResult(partition, plan, report_before, report_after, "reverted", reason, refined)

    logger.info(
        "Committed partition version %d: %d move(s), %d triple(s), cost %.4f -> %.4f",
        candidate.version,
        len(plan),
        plan.triples_moved,
        before,
        after,
    )
    return AdaptResult(candidate, plan, report_before, report_after, "committed", "", refined)
