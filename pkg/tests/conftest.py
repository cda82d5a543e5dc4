"""
Shared fixtures for the kgpart test suite
"""

import pytest

from kgpart.benchmark import SyntheticSpec, base_workload, generate_graph
from kgpart.kg_model import from_text
from kgpart.partitioner import Partition
from kgpart.query_analyzer import parse_query
from kgpart.terms import Feature, Term
from kgpart.workload import Workload

EX = "http://ex.org/"


def iri(local: str) -> Term:
    return Term.iri(EX + local)


def p_feature(local: str) -> Feature:
    return Feature.p(iri(local))


def star_query(qid: str, *predicates: str) -> str:
    """SELECT over patterns sharing the subject ?x"""
    body = " . ".join(f"?x <{EX}{p}> ?{p}v" for p in predicates)
    return f"SELECT ?x WHERE {{ {body} . }}"


def six_predicate_text() -> str:
    """a, b share subjects s0..s9; c, d share t0..t9; e, f share u0..u4"""
    lines = []
    for i in range(10):
        lines.append(f"<{EX}s{i}> <{EX}a> <{EX}va{i}> .")
        lines.append(f"<{EX}s{i}> <{EX}b> <{EX}vb{i}> .")
        lines.append(f"<{EX}t{i}> <{EX}c> <{EX}vc{i}> .")
        lines.append(f"<{EX}t{i}> <{EX}d> <{EX}vd{i}> .")
    for i in range(5):
        lines.append(f"<{EX}u{i}> <{EX}e> <{EX}ve{i}> .")
        lines.append(f"<{EX}u{i}> <{EX}f> <{EX}vf{i}> .")
    return "\n".join(lines) + "\n"


def six_predicate_workload(with_q3: bool = False) -> Workload:
    workload = Workload()
    workload.register(parse_query(star_query("Q1", "a", "b"), "Q1"))
    workload.register(parse_query(star_query("Q2", "c", "d"), "Q2"))
    if with_q3:
        workload.register(parse_query(star_query("Q3", "e", "f"), "Q3"))
    return workload


def six_predicate_partition() -> Partition:
    """Q1 on shard 0, Q2 on shard 1, the two orphans split across both"""
    return Partition(
        k=2,
        assignment={p_feature("a"): 0, p_feature("b"): 0, p_feature("c"): 1, p_feature("d"): 1},
        orphan={iri("e"): 0, iri("f"): 1},
        frequencies={"Q1": 1, "Q2": 1},
    )


@pytest.fixture
def six_graph():
    return from_text(six_predicate_text())


@pytest.fixture(scope="session")
def university_graph():
    return generate_graph(SyntheticSpec(universities=1, seed=42))


@pytest.fixture
def university_workload():
    return base_workload()
