"""
Query clustering: Jaccard feature distances and hierarchical agglomerative
clustering (single, complete, average linkage), cut into feature groups.
"""

import csv
import io
import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import AbstractSet, Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import EmptyMatrix
from .terms import Feature
from .workload import Workload

logger = logging.getLogger(__name__)

TIE_EPS = 1e-12


class Linkage(str, Enum):
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: Tuple[str, ...]
    d: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.labels)
        if self.d.shape != (n, n):
            raise ValueError(f"matrix shape {self.d.shape} does not match {n} labels")
        if n and (
            not np.allclose(self.d, self.d.T)
            or np.any(np.diag(self.d) != 0)
            or self.d.min() < 0
            or self.d.max() > 1
        ):
            raise ValueError("distances must be symmetric, zero on the diagonal and within [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    def distance(self, a: str, b: str) -> float:
        return float(self.d[self.labels.index(a), self.labels.index(b)])


@dataclass(frozen=True)
class Merge:
    """Clusters a and b joined at height; the new cluster id is n + merge index"""

    a: int
    b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    leaves: Tuple[str, ...]
    merges: Tuple[Merge, ...]
    linkage: Linkage = Linkage.SINGLE

    def members(self) -> Dict[int, Tuple[int, ...]]:
        """Leaf indices under every cluster id"""
        n = len(self.leaves)
        members: Dict[int, Tuple[int, ...]] = {i: (i,) for i in range(n)}
        for step, merge in enumerate(self.merges):
            members[n + step] = tuple(sorted(members[merge.a] + members[merge.b]))
        return members


@dataclass(frozen=True)
class FeatureGroup:
    group_id: int
    member_queries: Tuple[str, ...]
    features: frozenset

    def sorted_features(self) -> List[Feature]:
        return sorted(self.features, key=Feature.sort_key)


def jaccard_distance(a: AbstractSet[Feature], b: AbstractSet[Feature]) -> float:
    union = len(a | b)
    if union == 0:
        return 0.0
    return 1.0 - len(a & b) / union


def build_distance_matrix(workload: Workload) -> DistanceMatrix:
    labels = tuple(sorted(workload.entries))
    feature_sets = [workload.entries[qid].features.features for qid in labels]
    n = len(labels)
    d = np.zeros((n, n), dtype=float)
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = jaccard_distance(feature_sets[i], feature_sets[j])
    return DistanceMatrix(labels, d)


def _updated_distance(linkage: Linkage, d_ax: float, d_bx: float, size_a: int, size_b: int) -> float:
    if linkage is Linkage.SINGLE:
        return min(d_ax, d_bx)
    if linkage is Linkage.COMPLETE:
        return max(d_ax, d_bx)
    return (size_a * d_ax + size_b * d_bx) / (size_a + size_b)


def hac(dm: DistanceMatrix, linkage: Linkage = Linkage.SINGLE) -> Dendrogram:
    """Agglomerate clusters at minimum linkage distance until one remains.

    Equal distances (within TIE_EPS) resolve to the pair whose smallest leaf
    indices are lexicographically smallest; build_distance_matrix orders
    leaves by query id, so ties break by id.
    """
    linkage = Linkage(linkage)
    n = len(dm)
    if n == 0:
        raise EmptyMatrix()

    dist = np.full((2 * n - 1, 2 * n - 1), np.inf)
    dist[:n, :n] = dm.d
    size = {i: 1 for i in range(n)}
    rep = {i: i for i in range(n)}
    active: List[int] = list(range(n))
    merges: List[Merge] = []

    for step in range(n - 1):
        sub = dist[np.ix_(active, active)].copy()
        np.fill_diagonal(sub, np.inf)
        best = sub.min()
        rows, cols = np.nonzero(np.triu(sub <= best + TIE_EPS, k=1))
        candidates = sorted(
            (min(rep[active[i]], rep[active[j]]), max(rep[active[i]], rep[active[j]]), active[i], active[j])
            for i, j in zip(rows.tolist(), cols.tolist())
        )
        _, _, a, b = candidates[0]
        a, b = min(a, b), max(a, b)
        height = float(dist[a, b])
        new_id = n + step
        size[new_id] = size[a] + size[b]
        rep[new_id] = min(rep[a], rep[b])
        active = [c for c in active if c not in (a, b)]
        for c in active:
            dist[new_id, c] = dist[c, new_id] = _updated_distance(
                linkage, dist[a, c], dist[b, c], size[a], size[b]
            )
        active.append(new_id)
        merges.append(Merge(a, b, height, size[new_id]))
        logger.debug("merge %d: %d + %d at %.6f", step, a, b, height)

    return Dendrogram(dm.labels, tuple(merges), linkage)


def cut(dg: Dendrogram, d: float, workload: Workload) -> List[FeatureGroup]:
    """Flat clusters from the merges at or below height d"""
    if not 0 <= d <= 1:
        raise ValueError(f"cut distance must be within [0, 1], got {d}")
    n = len(dg.leaves)
    members = dg.members()
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for merge in dg.merges:
        if merge.height <= d:
            graph.add_edge(members[merge.a][0], members[merge.b][0])

    components = sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0])
    groups = []
    for group_id, component in enumerate(components):
        queries = tuple(dg.leaves[i] for i in component)
        features = frozenset(
            f for qid in queries if qid in workload for f in workload.entries[qid].features.features
        )
        groups.append(FeatureGroup(group_id, queries, features))
    logger.info("Cut at d=%.3f produced %d group(s) from %d queries", d, len(groups), n)
    return groups


def cluster_workload(workload: Workload, linkage: Linkage, d: float) -> Tuple[Dendrogram, List[FeatureGroup]]:
    if len(workload) == 0:
        return Dendrogram((), (), Linkage(linkage)), []
    dendrogram = hac(build_distance_matrix(workload), linkage)
    return dendrogram, cut(dendrogram, d, workload)


def dendrogram_to_json(dg: Dendrogram) -> str:
    payload = {
        "linkage": dg.linkage.value,
        "leaves": list(dg.leaves),
        "merges": [
            {"a": m.a, "b": m.b, "height": m.height, "size": m.size} for m in dg.merges
        ],
    }
    return json.dumps(payload, indent=2)


def distance_matrix_to_csv(dm: DistanceMatrix) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([""] + list(dm.labels))
    for label, row in zip(dm.labels, dm.d.tolist()):
        writer.writerow([label] + [f"{value:.6f}" for value in row])
    return buffer.getvalue()


def group_summary(groups: Sequence[FeatureGroup]) -> List[Tuple[int, int, int]]:
    """(group id, queries, features) rows for status output"""
    return [(g.group_id, len(g.member_queries), len(g.features)) for g in groups]
