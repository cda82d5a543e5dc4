"""
Seeded university knowledge graph generator and benchmark workloads.

The generated data uses the univ-bench vocabulary so that the fourteen
standard university-benchmark queries all have answers for University0,
and ships ten extra queries mixing linear, star, snowflake and complex
shapes over predicates the standard queries never touch.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Dict, List, Mapping, Optional, Set, Tuple, Union

from .errors import InputError
from .kg_model import KnowledgeGraph, serialize_ntriples
from .query_analyzer import parse_query
from .terms import RDF_TYPE, Term, Triple
from .workload import Workload, workload_lines

logger = logging.getLogger(__name__)

UB = "http://swat.cse.lehigh.edu/onto/univ-bench.owl#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
PREFIX_HEADER = f"PREFIX rdf: <{RDF}>\nPREFIX ub: <{UB}>\n"

DEPARTMENTS_PER_UNIVERSITY = 4
FACULTY_RANKS = (
    ("FullProfessor", 2),
    ("AssociateProfessor", 2),
    ("AssistantProfessor", 2),
    ("Lecturer", 1),
)
UNDERGRADUATES_PER_DEPARTMENT = 12
GRADUATES_PER_DEPARTMENT = 6
RESEARCH_GROUPS_PER_DEPARTMENT = 2
PUBLICATIONS_PER_FACULTY = 2
RESEARCH_AREAS = 12


@dataclass(frozen=True)
class SyntheticSpec:
    universities: int = 1
    seed: int = 42

    def __post_init__(self) -> None:
        if self.universities < 1:
            raise InputError(f"universities must be >= 1, got {self.universities}")


def university_iri(u: int) -> str:
    return f"http://www.University{u}.edu"


def department_iri(d: int, u: int) -> str:
    return f"http://www.Department{d}.University{u}.edu"


class _Emitter:
    """Collects triples in generation order, skipping duplicates"""

    def __init__(self) -> None:
        self.triples: List[Triple] = []
        self._seen: Set[Triple] = set()

    def add(self, s: str, p: str, o: Union[str, Term]) -> None:
        obj = o if isinstance(o, Term) else Term.iri(o)
        triple = Triple(Term.iri(s), Term.iri(p), obj)
        if triple not in self._seen:
            self._seen.add(triple)
            self.triples.append(triple)

    def typed(self, s: str, *classes: str) -> None:
        for cls in classes:
            self.add(s, RDF_TYPE, UB + cls)


def _telephone(rng: Random) -> Term:
    return Term.literal(f"{rng.randint(100, 999)}-{rng.randint(100, 999)}-{rng.randint(1000, 9999)}")


def _person(out: _Emitter, rng: Random, iri: str, local: str, dept: int, univ: int) -> None:
    out.add(iri, UB + "name", Term.literal(local))
    out.add(iri, UB + "emailAddress", Term.literal(f"{local}@Department{dept}.University{univ}.edu"))
    out.add(iri, UB + "telephone", _telephone(rng))


def _degree(out: _Emitter, person: str, predicate: str, univ: int, universities: Set[int]) -> None:
    out.add(person, UB + predicate, university_iri(univ))
    out.add(university_iri(univ), UB + "hasAlumnus", person)
    universities.add(univ)


def _department(out: _Emitter, rng: Random, d: int, u: int, spec: SyntheticSpec, universities: Set[int]) -> None:
    dept = department_iri(d, u)
    degree_pool = spec.universities + 2
    out.typed(dept, "Department")
    out.add(dept, UB + "subOrganizationOf", university_iri(u))

    faculty: List[str] = []
    for rank, count in FACULTY_RANKS:
        for i in range(count):
            local = f"{rank}{i}"
            iri = f"{dept}/{local}"
            faculty.append(iri)
            if rank == "Lecturer":
                out.typed(iri, rank, "Faculty", "Person")
            else:
                out.typed(iri, rank, "Professor", "Faculty", "Person")
                out.add(iri, UB + "researchInterest", Term.literal(f"Research{rng.randrange(RESEARCH_AREAS)}"))
            out.add(iri, UB + "worksFor", dept)
            _person(out, rng, iri, local, d, u)
            for predicate in ("undergraduateDegreeFrom", "mastersDegreeFrom", "doctoralDegreeFrom"):
                _degree(out, iri, predicate, rng.randrange(degree_pool), universities)

    chair = faculty[0]
    out.add(chair, UB + "headOf", dept)
    out.typed(chair, "Chair")

    courses, graduate_courses = [], []
    for j, teacher in enumerate(faculty):
        course = f"{dept}/Course{j}"
        graduate_course = f"{dept}/GraduateCourse{j}"
        courses.append(course)
        graduate_courses.append(graduate_course)
        out.typed(course, "Course")
        out.add(course, UB + "name", Term.literal(f"Course{j}"))
        out.typed(graduate_course, "GraduateCourse", "Course")
        out.add(graduate_course, UB + "name", Term.literal(f"GraduateCourse{j}"))
        out.add(teacher, UB + "teacherOf", course)
        out.add(teacher, UB + "teacherOf", graduate_course)

    # advisors teach a course their students take
    for i in range(UNDERGRADUATES_PER_DEPARTMENT):
        local = f"UndergraduateStudent{i}"
        iri = f"{dept}/{local}"
        out.typed(iri, "UndergraduateStudent", "Student", "Person")
        out.add(iri, UB + "memberOf", dept)
        _person(out, rng, iri, local, d, u)
        advisor = i % len(faculty)
        out.add(iri, UB + "advisor", faculty[advisor])
        out.add(iri, UB + "takesCourse", courses[advisor])
        out.add(iri, UB + "takesCourse", courses[(i + 3) % len(courses)])

    professors = len(faculty) - 1
    for i in range(GRADUATES_PER_DEPARTMENT):
        local = f"GraduateStudent{i}"
        iri = f"{dept}/{local}"
        out.typed(iri, "GraduateStudent", "Student", "Person")
        out.add(iri, UB + "memberOf", dept)
        _person(out, rng, iri, local, d, u)
        # the first graduate of each department studied at University0
        _degree(out, iri, "undergraduateDegreeFrom", 0 if i == 0 else rng.randrange(degree_pool), universities)
        advisor = i % professors
        out.add(iri, UB + "advisor", faculty[advisor])
        out.add(iri, UB + "takesCourse", graduate_courses[advisor])
        out.add(iri, UB + "takesCourse", graduate_courses[(i + 2) % len(graduate_courses)])
        out.add(iri, UB + "teachingAssistantOf", courses[i % len(courses)])
        paper = f"{iri}/Publication0"
        out.typed(paper, "Publication")
        out.add(paper, UB + "publicationAuthor", iri)
        out.add(paper, UB + "publicationAuthor", faculty[advisor])

    for j, author in enumerate(faculty):
        for p in range(PUBLICATIONS_PER_FACULTY):
            paper = f"{author}/Publication{p}"
            out.typed(paper, "Publication")
            out.add(paper, UB + "publicationAuthor", author)
            if p == 1:
                out.add(paper, UB + "publicationAuthor", faculty[(j + 1) % len(faculty)])

    for g in range(RESEARCH_GROUPS_PER_DEPARTMENT):
        group = f"{dept}/ResearchGroup{g}"
        out.typed(group, "ResearchGroup")
        out.add(group, UB + "subOrganizationOf", dept)
        out.add(group, UB + "subOrganizationOf", university_iri(u))


def generate_triples(spec: SyntheticSpec) -> List[Triple]:
    rng = Random(spec.seed)
    out = _Emitter()
    universities: Set[int] = set(range(spec.universities))
    for u in range(spec.universities):
        for d in range(DEPARTMENTS_PER_UNIVERSITY):
            _department(out, rng, d, u, spec, universities)
    for u in sorted(universities):
        out.typed(university_iri(u), "University")
    logger.info("Generated %d triples for %d universities", len(out.triples), spec.universities)
    return out.triples


def generate_graph(spec: SyntheticSpec) -> KnowledgeGraph:
    return KnowledgeGraph.from_triples(generate_triples(spec))


def write_ntriples(spec: SyntheticSpec, path: Union[str, Path]) -> int:
    graph = generate_graph(spec)
    Path(path).write_bytes(serialize_ntriples(graph))
    return len(graph)


def _query(body: str, select: str = "?X") -> str:
    return f"{PREFIX_HEADER}SELECT {select} WHERE {{\n{body}\n}}\n"


D0 = department_iri(0, 0)
U0 = university_iri(0)

LUBM_QUERIES: Dict[str, str] = {
    "Q1": _query(
        f"  ?X rdf:type ub:GraduateStudent .\n  ?X ub:takesCourse <{D0}/GraduateCourse0> ."
    ),
    "Q2": _query(
        "  ?X rdf:type ub:GraduateStudent .\n  ?Y rdf:type ub:University .\n"
        "  ?Z rdf:type ub:Department .\n  ?X ub:memberOf ?Z .\n"
        "  ?Z ub:subOrganizationOf ?Y .\n  ?X ub:undergraduateDegreeFrom ?Y .",
        "?X ?Y ?Z",
    ),
    "Q3": _query(
        f"  ?X rdf:type ub:Publication .\n  ?X ub:publicationAuthor <{D0}/AssistantProfessor0> ."
    ),
    "Q4": _query(
        f"  ?X rdf:type ub:Professor .\n  ?X ub:worksFor <{D0}> .\n  ?X ub:name ?Y1 .\n"
        "  ?X ub:emailAddress ?Y2 .\n  ?X ub:telephone ?Y3 .",
        "?X ?Y1 ?Y2 ?Y3",
    ),
    "Q5": _query(f"  ?X rdf:type ub:Person .\n  ?X ub:memberOf <{D0}> ."),
    "Q6": _query("  ?X rdf:type ub:Student ."),
    "Q7": _query(
        "  ?X rdf:type ub:Student .\n  ?Y rdf:type ub:Course .\n  ?X ub:takesCourse ?Y .\n"
        f"  <{D0}/AssociateProfessor0> ub:teacherOf ?Y .",
        "?X ?Y",
    ),
    # the university stays a variable so subOrganizationOf is a P feature
    "Q8": _query(
        "  ?X rdf:type ub:Student .\n  ?Y rdf:type ub:Department .\n  ?X ub:memberOf ?Y .\n"
        "  ?Y ub:subOrganizationOf ?U .\n  ?X ub:emailAddress ?Z .",
        "?X ?Y ?Z",
    ),
    "Q9": _query(
        "  ?X rdf:type ub:Student .\n  ?Y rdf:type ub:Faculty .\n  ?Z rdf:type ub:Course .\n"
        "  ?X ub:advisor ?Y .\n  ?Y ub:teacherOf ?Z .\n  ?X ub:takesCourse ?Z .",
        "?X ?Y ?Z",
    ),
    "Q10": _query(f"  ?X rdf:type ub:Student .\n  ?X ub:takesCourse <{D0}/GraduateCourse0> ."),
    "Q11": _query(f"  ?X rdf:type ub:ResearchGroup .\n  ?X ub:subOrganizationOf <{U0}> ."),
    "Q12": _query(
        "  ?X rdf:type ub:Chair .\n  ?Y rdf:type ub:Department .\n  ?X ub:worksFor ?Y .\n"
        f"  ?Y ub:subOrganizationOf <{U0}> .",
        "?X ?Y",
    ),
    "Q13": _query(f"  ?X rdf:type ub:Person .\n  <{U0}> ub:hasAlumnus ?X ."),
    "Q14": _query("  ?X rdf:type ub:UndergraduateStudent ."),
}

EXTRA_QUERIES: Dict[str, str] = {
    # linear
    "EQ1": _query(
        "  ?X ub:advisor ?Y .\n  ?Y ub:teacherOf ?Z .\n  ?Z rdf:type ub:GraduateCourse .", "?X ?Y ?Z"
    ),
    "EQ2": _query(
        "  ?X ub:headOf ?Y .\n  ?Y ub:subOrganizationOf ?Z .\n  ?Z ub:hasAlumnus ?W .", "?X ?W"
    ),
    # star
    "EQ3": _query(
        "  ?X rdf:type ub:FullProfessor .\n  ?X ub:researchInterest ?R .\n"
        "  ?X ub:doctoralDegreeFrom ?U .\n  ?X ub:emailAddress ?E .",
        "?X ?R ?U",
    ),
    "EQ4": _query(
        "  ?X rdf:type ub:Lecturer .\n  ?X ub:teacherOf ?C .\n  ?X ub:name ?N .\n  ?X ub:telephone ?T .",
        "?X ?C ?N",
    ),
    "EQ5": _query(
        "  ?X rdf:type ub:AssistantProfessor .\n  ?X ub:mastersDegreeFrom ?U .\n  ?X ub:worksFor ?D .",
        "?X ?U ?D",
    ),
    # snowflake
    "EQ6": _query(
        "  ?X rdf:type ub:GraduateStudent .\n  ?X ub:teachingAssistantOf ?C .\n  ?C ub:name ?CN .\n"
        "  ?X ub:advisor ?P .\n  ?P ub:researchInterest ?R .",
        "?X ?C ?P ?R",
    ),
    "EQ7": _query(
        "  ?P rdf:type ub:Publication .\n  ?P ub:publicationAuthor ?A .\n  ?A ub:worksFor ?D .\n"
        "  ?A ub:doctoralDegreeFrom ?U .\n  ?D ub:subOrganizationOf ?V .",
        "?P ?A ?U",
    ),
    # complex
    "EQ8": _query(
        "  ?X ub:headOf ?D .\n  ?Y ub:worksFor ?D .\n  ?Y ub:teacherOf ?C .\n"
        "  ?S ub:takesCourse ?C .\n  ?S ub:memberOf ?D .",
        "?X ?Y ?S",
    ),
    "EQ9": _query(
        "  ?S rdf:type ub:GraduateStudent .\n  ?S ub:advisor ?P .\n  ?P rdf:type ub:FullProfessor .\n"
        "  ?S ub:takesCourse ?C .\n  ?P ub:teacherOf ?C .",
        "?S ?P ?C",
    ),
    "EQ10": _query(
        "  ?S ub:teachingAssistantOf ?C .\n  ?P ub:teacherOf ?C .\n  ?P ub:mastersDegreeFrom ?U .\n"
        "  ?S ub:undergraduateDegreeFrom ?U .",
        "?S ?P ?U",
    ),
}


def query_texts(with_extra: bool = False) -> Dict[str, str]:
    texts = dict(LUBM_QUERIES)
    if with_extra:
        texts.update(EXTRA_QUERIES)
    return texts


def build_workload(
    texts: Mapping[str, str],
    frequencies: Optional[Mapping[str, int]] = None,
    workload: Optional[Workload] = None,
) -> Workload:
    workload = workload if workload is not None else Workload()
    for qid, text in texts.items():
        workload.register(parse_query(text, qid), (frequencies or {}).get(qid, 1))
    return workload


def base_workload(frequencies: Optional[Mapping[str, int]] = None) -> Workload:
    return build_workload(LUBM_QUERIES, frequencies)


def workload_jsonl(with_extra: bool = False, frequencies: Optional[Mapping[str, int]] = None) -> str:
    records: List[Tuple[str, str, int]] = [
        (qid, text, (frequencies or {}).get(qid, 1)) for qid, text in query_texts(with_extra).items()
    ]
    return workload_lines(records)


def biased_frequencies(query_id: str, share: float, texts: Mapping[str, str]) -> Dict[str, int]:
    """Frequencies giving query_id the requested share of all runs, others 1"""
    if not 0 < share < 1:
        raise InputError(f"share must be within (0, 1), got {share}")
    others = len(texts) - 1
    boosted = max(1, round(share * others / (1 - share)))
    return {qid: boosted if qid == query_id else 1 for qid in texts}
