"""
In-memory triple store.

Terms are interned to integer ids; triples are kept once (set semantics) and
indexed by subject, predicate and object so that P and PO features and any
triple pattern with a bound position can be materialized without a scan.
"""

import io
import logging
import re
from collections import defaultdict
from pathlib import Path
from typing import (
    BinaryIO,
    Dict,
    Iterable,
    Iterator,
    List,
    Optional,
    Set,
    Tuple,
    Union,
)

from rdflib import BNode, Graph, Literal, URIRef

from .errors import AllVariables, MalformedLine
from .terms import Feature, FeatureKind, Term, TermKind, Triple, TriplePattern, Variable

logger = logging.getLogger(__name__)

IdTriple = Tuple[int, int, int]

_IRI = re.compile(r'<([^<>"{}|^`\\\x00-\x20]*)>')
_BLANK = re.compile(r"_:([A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)")
_LITERAL = re.compile(
    r'"((?:[^"\\\n\r]|\\.)*)"'
    r'(?:@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)|\^\^<([^<>"{}|^`\\\x00-\x20]*)>)?'
)
_WS = re.compile(r"[ \t]*")
_ESCAPE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")
_SIMPLE_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _unescape(text: str, line_number: int) -> str:
    def replace(match: "re.Match[str]") -> str:
        short, long_, simple = match.groups()
        if short or long_:
            return chr(int(short or long_, 16))
        if simple in _SIMPLE_ESCAPES:
            return _SIMPLE_ESCAPES[simple]
        raise MalformedLine(line_number, f"invalid escape \\{simple}")

    return _ESCAPE.sub(replace, text)


def _read_term(line: str, pos: int, line_number: int, allowed: str) -> Tuple[Optional[Term], int]:
    """Read one term at pos; allowed is a subset of 'ibl' (iri, blank, literal)"""
    if "i" in allowed:
        match = _IRI.match(line, pos)
        if match:
            value = _unescape(match.group(1), line_number)
            if not value:
                raise MalformedLine(line_number, "empty IRI")
            return Term.iri(value), match.end()
    if "b" in allowed:
        match = _BLANK.match(line, pos)
        if match:
            return Term.blank(match.group(1)), match.end()
    if "l" in allowed:
        match = _LITERAL.match(line, pos)
        if match:
            lexical = _unescape(match.group(1), line_number)
            return Term.literal(lexical, match.group(3), match.group(2)), match.end()
    return None, pos


def _skip_ws(line: str, pos: int) -> int:
    return _WS.match(line, pos).end()  # type: ignore[union-attr]


def parse_statement(line: str, line_number: int) -> Optional[Triple]:
    """Parse one N-Triples line; None for blank and comment lines"""
    pos = _skip_ws(line, 0)
    if pos >= len(line) or line[pos] == "#":
        return None

    subject, pos = _read_term(line, pos, line_number, "ib")
    if subject is None:
        raise MalformedLine(line_number, "expected subject IRI or blank node")
    pos = _skip_ws(line, pos)
    predicate, pos = _read_term(line, pos, line_number, "i")
    if predicate is None:
        reason = "missing predicate" if pos >= len(line) or line[pos] == "." else "expected predicate IRI"
        raise MalformedLine(line_number, reason)
    pos = _skip_ws(line, pos)
    obj, pos = _read_term(line, pos, line_number, "ibl")
    if obj is None:
        reason = "missing object" if pos >= len(line) or line[pos] == "." else "invalid object term"
        raise MalformedLine(line_number, reason)
    pos = _skip_ws(line, pos)
    if pos >= len(line) or line[pos] != ".":
        raise MalformedLine(line_number, "expected '.' after object")
    pos = _skip_ws(line, pos + 1)
    if pos < len(line) and line[pos] != "#":
        raise MalformedLine(line_number, "unexpected content after '.'")
    return Triple(subject, predicate, obj)


def parse_term(text: str) -> Term:
    """Parse a single term in N-Triples syntax, e.g. '<http://x>' or '"a"@en'"""
    stripped = text.strip()
    term, end = _read_term(stripped, 0, 0, "ibl")
    if term is None or end != len(stripped):
        raise MalformedLine(0, f"not a single N-Triples term: {text!r}")
    return term


class KnowledgeGraph:
    """Interned, indexed, immutable-after-load triple set"""

    def __init__(self) -> None:
        self._terms: List[Term] = []
        self._term_ids: Dict[Term, int] = {}
        self._triples: List[IdTriple] = []
        self._triple_ids: Dict[IdTriple, int] = {}
        self.index_s: Dict[int, Set[int]] = defaultdict(set)
        self.index_p: Dict[int, Set[int]] = defaultdict(set)
        self.index_o: Dict[int, Set[int]] = defaultdict(set)
        self._frozen = False

    @classmethod
    def from_triples(cls, triples: Iterable[Triple]) -> "KnowledgeGraph":
        graph = cls()
        for triple in triples:
            graph._add(triple)
        graph._freeze()
        return graph

    def _intern(self, term: Term) -> int:
        term_id = self._term_ids.get(term)
        if term_id is None:
            term_id = len(self._terms)
            self._terms.append(term)
            self._term_ids[term] = term_id
        return term_id

    def _add(self, triple: Triple) -> int:
        if self._frozen:
            raise RuntimeError("KnowledgeGraph is immutable after load")
        key = (
            self._intern(triple.subject),
            self._intern(triple.predicate),
            self._intern(triple.object),
        )
        existing = self._triple_ids.get(key)
        if existing is not None:
            return existing
        triple_id = len(self._triples)
        self._triples.append(key)
        self._triple_ids[key] = triple_id
        self.index_s[key[0]].add(triple_id)
        self.index_p[key[1]].add(triple_id)
        self.index_o[key[2]].add(triple_id)
        return triple_id

    def _freeze(self) -> None:
        # plain dicts so that reads of unknown ids do not insert empty sets
        self.index_s = dict(self.index_s)
        self.index_p = dict(self.index_p)
        self.index_o = dict(self.index_o)
        self._frozen = True

    @property
    def triple_count(self) -> int:
        return len(self._triples)

    def __len__(self) -> int:
        return len(self._triples)

    def term(self, term_id: int) -> Term:
        return self._terms[term_id]

    def term_id(self, term: Term) -> Optional[int]:
        return self._term_ids.get(term)

    def ids(self, triple_id: int) -> IdTriple:
        return self._triples[triple_id]

    def triple(self, triple_id: int) -> Triple:
        s, p, o = self._triples[triple_id]
        return Triple(self._terms[s], self._terms[p], self._terms[o])

    def triples(self) -> Iterator[Tuple[int, Triple]]:
        for triple_id in range(len(self._triples)):
            yield triple_id, self.triple(triple_id)

    def predicates(self) -> List[Term]:
        return sorted((self._terms[p] for p in self.index_p), key=Term.n3)

    def term_set(self) -> Set[Term]:
        return set(self._terms)

    def triple_set(self) -> Set[Triple]:
        return {self.triple(t) for t in range(len(self._triples))}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.term_set() == other.term_set() and self.triple_set() == other.triple_set()

    __hash__ = None  # type: ignore[assignment]

    def _pattern_ids(self, pattern: TriplePattern) -> Optional[List[Optional[int]]]:
        """Bound term ids per position (None for variables); None if a term is unknown"""
        ids: List[Optional[int]] = []
        for term in pattern.terms():
            if isinstance(term, Variable):
                ids.append(None)
            else:
                term_id = self._term_ids.get(term)
                if term_id is None:
                    return None
                ids.append(term_id)
        return ids

    def matches(self, triple_id: int, pattern: TriplePattern) -> bool:
        ids = self._triples[triple_id]
        seen: Dict[Variable, int] = {}
        for value, term in zip(ids, pattern.terms()):
            if isinstance(term, Variable):
                if seen.setdefault(term, value) != value:
                    return False
            elif self._term_ids.get(term) != value:
                return False
        return True

    def lookup(self, pattern: TriplePattern) -> Set[int]:
        """Ids of triples matching the pattern, via its most selective index"""
        if not pattern.bound_positions():
            raise AllVariables()
        ids = self._pattern_ids(pattern)
        if ids is None:
            return set()
        indexes = (self.index_s, self.index_p, self.index_o)
        candidates = [indexes[i].get(term_id, set()) for i, term_id in enumerate(ids) if term_id is not None]
        smallest = min(candidates, key=len)
        return {t for t in smallest if self.matches(t, pattern)}

    def scan(self, pattern: TriplePattern) -> Set[int]:
        """Full scan; the only way to evaluate an all-variable pattern"""
        return {t for t in range(len(self._triples)) if self.matches(t, pattern)}

    def materialize_feature(self, feature: Feature) -> Set[int]:
        p_id = self._term_ids.get(feature.predicate)
        if p_id is None:
            return set()
        with_predicate = self.index_p.get(p_id, set())
        if feature.kind is FeatureKind.P:
            return set(with_predicate)
        o_id = self._term_ids.get(feature.object)  # type: ignore[arg-type]
        if o_id is None:
            return set()
        return with_predicate & self.index_o.get(o_id, set())

    def group_by_owner(self, features: Iterable[Feature]) -> Dict[Feature, Set[int]]:
        """Map every triple to its owning unit (PO > P > predicate orphan).

        Predicates with no P feature in `features` are reported under
        their P feature anyway; callers treat those as orphan units.
        """
        po_owner: Dict[Tuple[int, int], Feature] = {}
        for feature in features:
            if feature.kind is FeatureKind.PO:
                p_id = self._term_ids.get(feature.predicate)
                o_id = self._term_ids.get(feature.object)  # type: ignore[arg-type]
                if p_id is not None and o_id is not None:
                    po_owner[(p_id, o_id)] = feature
        p_owner = {p_id: Feature.p(self._terms[p_id]) for p_id in self.index_p}
        groups: Dict[Feature, Set[int]] = defaultdict(set)
        for triple_id, (_, p_id, o_id) in enumerate(self._triples):
            owner = po_owner.get((p_id, o_id)) or p_owner[p_id]
            groups[owner].add(triple_id)
        return dict(groups)


def _iter_lines(source: Union[BinaryIO, Iterable[Union[str, bytes]]]) -> Iterator[Tuple[int, str]]:
    for line_number, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedLine(line_number, f"invalid UTF-8: {exc.reason}") from exc
        yield line_number, raw.rstrip("\r\n")


def parse_ntriples(source: Union[BinaryIO, Iterable[Union[str, bytes]]]) -> KnowledgeGraph:
    """Build a graph from N-Triples lines; fails fast on the first bad line"""
    graph = KnowledgeGraph()
    statements = 0
    for line_number, line in _iter_lines(source):
        triple = parse_statement(line, line_number)
        if triple is not None:
            graph._add(triple)
            statements += 1
    graph._freeze()
    logger.info(
        "Parsed %d statements into %d triples (%d terms)",
        statements,
        graph.triple_count,
        len(graph._terms),
    )
    return graph


def load_ntriples(path: Union[str, Path]) -> KnowledgeGraph:
    with open(path, "rb") as f:
        return parse_ntriples(f)


def _to_rdflib(term: Term) -> Union[URIRef, BNode, Literal]:
    if term.kind is TermKind.IRI:
        return URIRef(term.lexical)
    if term.kind is TermKind.BLANK:
        return BNode(term.lexical)
    datatype = URIRef(term.datatype) if term.datatype else None
    return Literal(term.lexical, lang=term.language, datatype=datatype, normalize=False)


def serialize_ntriples(graph: KnowledgeGraph, stream: Optional[BinaryIO] = None) -> bytes:
    """Canonical N-Triples: rdflib term rendering, lines sorted for stable bytes"""
    rdf = Graph()
    for _, triple in graph.triples():
        rdf.add(
            (
                _to_rdflib(triple.subject),
                _to_rdflib(triple.predicate),
                _to_rdflib(triple.object),
            )
        )
    rendered = rdf.serialize(format="nt", encoding="utf-8")
    lines = sorted(line for line in rendered.splitlines() if line.strip())
    data = b"".join(line + b"\n" for line in lines)
    if stream is not None:
        stream.write(data)
    return data


def lookup(graph: KnowledgeGraph, pattern: TriplePattern) -> Set[int]:
    return graph.lookup(pattern)


def scan(graph: KnowledgeGraph, pattern: TriplePattern) -> Set[int]:
    return graph.scan(pattern)


def materialize_feature(graph: KnowledgeGraph, feature: Feature) -> Set[int]:
    return graph.materialize_feature(feature)


def group_by_owner(graph: KnowledgeGraph, features: Iterable[Feature]) -> Dict[Feature, Set[int]]:
    return graph.group_by_owner(features)


def from_text(text: str) -> KnowledgeGraph:
    """Convenience for tests and fixtures"""
    return parse_ntriples(io.StringIO(text))
