#!/usr/bin/env python3
"""
Test suite for Jaccard distances, HAC and dendrogram cuts
"""

import itertools
import json
import random

import numpy as np
import pytest

from kgpart.benchmark import LUBM_QUERIES, base_workload, build_workload
from kgpart.clustering import (
    DistanceMatrix,
    Linkage,
    build_distance_matrix,
    cluster_workload,
    cut,
    dendrogram_to_json,
    distance_matrix_to_csv,
    group_summary,
    hac,
    jaccard_distance,
)
from kgpart.errors import EmptyMatrix
from kgpart.query_analyzer import parse_query
from kgpart.terms import Feature, Term
from kgpart.workload import Workload


def features(*names: str):
    return {Feature.p(Term.iri(f"http://{n}")) for n in names}


def random_matrix(rng: random.Random, n: int) -> DistanceMatrix:
    d = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        d[i, j] = d[j, i] = rng.random()
    return DistanceMatrix(tuple(f"q{i}" for i in range(n)), d)


def rescan_oracle(dm: DistanceMatrix, linkage: Linkage):
    """Merge sequence by recomputing every cluster distance from its leaves"""
    clusters = [(i,) for i in range(len(dm))]
    sequence = []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(clusters, 2):
            pairs = [dm.d[i, j] for i in a for j in b]
            if linkage is Linkage.SINGLE:
                dist = min(pairs)
            elif linkage is Linkage.COMPLETE:
                dist = max(pairs)
            else:
                dist = sum(pairs) / len(pairs)
            key = (dist, min(a[0], b[0]), max(a[0], b[0]))
            if best is None or key < best[0]:
                best = (key, a, b)
        (height, _, _), a, b = best
        sequence.append((frozenset([a, b]), height))
        clusters = [c for c in clusters if c not in (a, b)] + [tuple(sorted(a + b))]
    return sequence


def hac_sequence(dg):
    members = dg.members()
    return [(frozenset([members[m.a], members[m.b]]), m.height) for m in dg.merges]


class TestJaccard:
    """Test the feature distance"""

    def test_q2_q8_distance(self):
        workload = build_workload({"Q2": LUBM_QUERIES["Q2"], "Q8": LUBM_QUERIES["Q8"]})
        a = workload.entries["Q2"].features.features
        b = workload.entries["Q8"].features.features
        assert len(a & b) == 3
        assert len(a | b) == 8
        assert jaccard_distance(a, b) == 0.625

    def test_identical_sets(self):
        assert jaccard_distance(features("a", "b"), features("a", "b")) == 0

    def test_disjoint_sets(self):
        assert jaccard_distance(features("a"), features("b")) == 1

    def test_empty_sets(self):
        assert jaccard_distance(set(), set()) == 0


class TestDistanceMatrix:
    """Test matrix construction"""

    def test_q2_q8_matrix(self):
        workload = build_workload({"Q2": LUBM_QUERIES["Q2"], "Q8": LUBM_QUERIES["Q8"]})
        dm = build_distance_matrix(workload)
        assert dm.labels == ("Q2", "Q8")
        assert dm.d[0, 1] == dm.d[1, 0] == 0.625
        assert dm.distance("Q8", "Q2") == 0.625

    def test_single_query(self):
        workload = build_workload({"Q6": LUBM_QUERIES["Q6"]})
        dm = build_distance_matrix(workload)
        assert dm.d.shape == (1, 1)
        assert dm.d[0, 0] == 0

    def test_disjoint_queries(self):
        workload = Workload()
        for name in "abc":
            workload.register(parse_query(f"SELECT ?x WHERE {{ ?x <http://{name}> ?y }}", name))
        dm = build_distance_matrix(workload)
        off = dm.d[~np.eye(3, dtype=bool)]
        assert np.all(off == 1)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            DistanceMatrix(("a", "b"), np.array([[0.0, 0.2], [0.3, 0.0]]))

    def test_csv_export(self):
        workload = build_workload({"Q2": LUBM_QUERIES["Q2"], "Q8": LUBM_QUERIES["Q8"]})
        lines = distance_matrix_to_csv(build_distance_matrix(workload)).splitlines()
        assert lines[0] == ",Q2,Q8"
        assert lines[1] == "Q2,0.000000,0.625000"


class TestHac:
    """Test agglomerative clustering"""

    @pytest.mark.parametrize("linkage", list(Linkage))
    def test_two_queries(self, linkage):
        dm = DistanceMatrix(("a", "b"), np.array([[0.0, 0.625], [0.625, 0.0]]))
        dg = hac(dm, linkage)
        assert len(dg.merges) == 1
        assert dg.merges[0].height == 0.625
        assert dg.merges[0].size == 2

    def test_single_query(self):
        dg = hac(DistanceMatrix(("a",), np.zeros((1, 1))))
        assert dg.merges == ()

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            hac(DistanceMatrix((), np.zeros((0, 0))))

    def test_ties_prefer_smallest_leaves(self):
        d = np.ones((4, 4)) - np.eye(4)
        dg = hac(DistanceMatrix(tuple("abcd"), d))
        assert (dg.merges[0].a, dg.merges[0].b) == (0, 1)

    def test_ties_break_by_query_id(self):
        workload = Workload()
        for name in "cba":
            workload.register(parse_query(f"SELECT ?x WHERE {{ ?x <http://{name}> ?y }}", name))
        dm = build_distance_matrix(workload)
        assert dm.labels == ("a", "b", "c")
        first = hac(dm).merges[0]
        assert {dm.labels[first.a], dm.labels[first.b]} == {"a", "b"}

    @pytest.mark.parametrize("linkage", list(Linkage))
    def test_matches_rescan_oracle(self, linkage):
        rng = random.Random(2024)
        for _ in range(200):
            dm = random_matrix(rng, rng.randint(2, 8))
            ours = hac_sequence(hac(dm, linkage))
            expected = rescan_oracle(dm, linkage)
            assert [m for m, _ in ours] == [m for m, _ in expected]
            for (_, h1), (_, h2) in zip(ours, expected):
                assert abs(h1 - h2) <= 1e-12

    @pytest.mark.parametrize("linkage", list(Linkage))
    def test_heights_match_scipy(self, linkage):
        hierarchy = pytest.importorskip("scipy.cluster.hierarchy")
        distance = pytest.importorskip("scipy.spatial.distance")
        rng = random.Random(11)
        for _ in range(20):
            dm = random_matrix(rng, 6)
            reference = hierarchy.linkage(distance.squareform(dm.d), method=linkage.value)
            heights = sorted(m.height for m in hac(dm, linkage).merges)
            assert np.allclose(heights, sorted(reference[:, 2]), atol=1e-12)

    def test_json_export(self):
        dm = DistanceMatrix(("a", "b"), np.array([[0.0, 0.5], [0.5, 0.0]]))
        payload = json.loads(dendrogram_to_json(hac(dm, Linkage.AVERAGE)))
        assert payload == {
            "linkage": "average",
            "leaves": ["a", "b"],
            "merges": [{"a": 0, "b": 1, "height": 0.5, "size": 2}],
        }


class TestCut:
    """Test flat clusters from the dendrogram"""

    def setup_method(self):
        self.workload = Workload()
        for name in "abc":
            self.workload.register(parse_query(f"SELECT ?x WHERE {{ ?x <http://{name}> ?y }}", name))
        self.dg = hac(build_distance_matrix(self.workload))

    def test_zero_cut_gives_singletons(self):
        groups = cut(self.dg, 0, self.workload)
        assert [g.member_queries for g in groups] == [("a",), ("b",), ("c",)]

    def test_full_cut_gives_one_group(self):
        groups = cut(self.dg, 1, self.workload)
        assert len(groups) == 1
        assert groups[0].features == features("a", "b", "c")

    def test_cut_range(self):
        with pytest.raises(ValueError):
            cut(self.dg, 1.5, self.workload)

    def test_lubm_groups_match_oracle(self):
        workload = base_workload()
        dm = build_distance_matrix(workload)
        d = 0.6
        groups = cut(hac(dm, Linkage.SINGLE), d, workload)
        # single-linkage groups are the components of the graph of pairs within d
        n = len(dm)
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                i = parent[i]
            return i

        for i, j in itertools.combinations(range(n), 2):
            if dm.d[i, j] <= d:
                parent[find(i)] = find(j)
        expected = {}
        for i in range(n):
            expected.setdefault(find(i), []).append(dm.labels[i])
        assert sorted(g.member_queries for g in groups) == sorted(tuple(v) for v in expected.values())

    def test_cluster_workload_and_summary(self):
        _, groups = cluster_workload(self.workload, Linkage.COMPLETE, 0.5)
        assert group_summary(groups) == [(0, 1, 1), (1, 1, 1), (2, 1, 1)]

    def test_cluster_empty_workload(self):
        dg, groups = cluster_workload(Workload(), Linkage.SINGLE, 0.5)
        assert dg.merges == ()
        assert groups == []


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
