"""
SPARQL basic-graph-pattern parsing and workload feature extraction.

Only the subset used by the benchmark workloads is accepted:
PREFIX declarations, SELECT with explicit variables, an optional FROM
clause (ignored) and a WHERE block of triple patterns.
"""

import logging
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .errors import QuerySyntaxError, UnknownPrefix, UnsupportedConstruct
from .terms import (
    RDF_TYPE,
    Feature,
    JoinFeature,
    JoinKind,
    PatternTerm,
    Term,
    TermKind,
    TriplePattern,
    Variable,
)

logger = logging.getLogger(__name__)

XSD = "http://www.w3.org/2001/XMLSchema#"

WELL_KNOWN_PREFIXES: Dict[str, str] = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": XSD,
    "owl": "http://www.w3.org/2002/07/owl#",
}

UNSUPPORTED_KEYWORDS = frozenset(
    {
        "FILTER", "OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "BIND",
        "VALUES", "GROUP", "ORDER", "HAVING", "LIMIT", "OFFSET", "DISTINCT",
        "REDUCED", "ASK", "CONSTRUCT", "DESCRIBE", "NAMED", "INSERT", "DELETE",
    }
)

_PN_LOCAL = r"[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?"
_TOKEN = re.compile(
    r"""
    (?P<skip>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n\r]|\\.)*")
  | (?P<lang>@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*)
  | (?P<dtype>\^\^)
  | (?P<number>[+-]?\d+(?:\.\d+)?)
  | (?P<pname>(?:[A-Za-z][A-Za-z0-9_\-]*)?:(?:"""
    + _PN_LOCAL
    + r""")?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}.*;,()])
    """,
    re.VERBOSE,
)
_PN_LOCAL_FULL = re.compile(_PN_LOCAL + r"\Z")
_STRING_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", "b": "\b", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            raise QuerySyntaxError(pos, "a SPARQL token", text[pos : pos + 10])
        kind = match.lastgroup or ""
        if kind != "skip":
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    return tokens


@dataclass(frozen=True)
class QuerySpec:
    id: str
    select_vars: Tuple[Variable, ...]
    patterns: Tuple[TriplePattern, ...]
    prefixes: Mapping[str, str] = field(default_factory=dict, compare=False, hash=False)
    dataset: Optional[str] = field(default=None, compare=False)
    text: str = field(default="", compare=False)

    def same_body(self, other: "QuerySpec") -> bool:
        return self.select_vars == other.select_vars and self.patterns == other.patterns


@dataclass(frozen=True)
class PatternJoin:
    """A join between two patterns of one query, by pattern index"""

    kind: JoinKind
    left: int
    right: int
    via: Variable


@dataclass(frozen=True)
class QueryFeatures:
    query_id: str
    features: FrozenSet[Feature]
    joins: FrozenSet[JoinFeature]
    pattern_features: Tuple[Optional[Feature], ...] = field(default=(), compare=False)
    pattern_joins: Tuple[PatternJoin, ...] = field(default=(), compare=False)

    def sorted_features(self) -> List[Feature]:
        return sorted(self.features, key=Feature.sort_key)


class _Parser:
    def __init__(self, text: str, prefixes: Mapping[str, str]):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0
        self.prefixes: Dict[str, str] = dict(WELL_KNOWN_PREFIXES)
        self.prefixes.update(prefixes)
        self.declared: Dict[str, str] = {}

    def peek(self) -> Optional[Token]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def position(self) -> int:
        token = self.peek()
        return token.position if token else len(self.text)

    def advance(self) -> Token:
        token = self.peek()
        if token is None:
            raise QuerySyntaxError(len(self.text), "more input")
        self.index += 1
        return token

    def keyword(self) -> Optional[str]:
        token = self.peek()
        if token is not None and token.kind == "name":
            return token.text.upper()
        return None

    def expect_punct(self, value: str) -> Token:
        token = self.peek()
        if token is None or token.kind != "punct" or token.text != value:
            raise QuerySyntaxError(self.position(), repr(value), token.text if token else "")
        return self.advance()

    def check_unsupported(self) -> None:
        word = self.keyword()
        if word in UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(word)  # type: ignore[arg-type]

    def parse(self, query_id: str) -> QuerySpec:
        while self.keyword() == "PREFIX":
            self.advance()
            name = self.advance()
            if name.kind != "pname" or not name.text.endswith(":"):
                raise QuerySyntaxError(name.position, "prefix name ending in ':'", name.text)
            iri = self.advance()
            if iri.kind != "iri":
                raise QuerySyntaxError(iri.position, "namespace IRI", iri.text)
            self.declared[name.text[:-1]] = iri.text[1:-1]
            self.prefixes[name.text[:-1]] = iri.text[1:-1]

        self.check_unsupported()
        if self.keyword() != "SELECT":
            raise QuerySyntaxError(self.position(), "SELECT", self.peek().text if self.peek() else "")
        self.advance()
        self.check_unsupported()

        select_vars: List[Variable] = []
        while True:
            token = self.peek()
            if token is not None and token.kind == "punct" and token.text == "*":
                raise UnsupportedConstruct("SELECT *")
            if token is None or token.kind != "var":
                break
            select_vars.append(Variable(self.advance().text[1:]))
        if not select_vars:
            raise QuerySyntaxError(self.position(), "at least one projected variable")

        dataset = None
        if self.keyword() == "FROM":
            self.advance()
            self.check_unsupported()
            source = self.advance()
            if source.kind not in ("iri", "pname", "name"):
                raise QuerySyntaxError(source.position, "dataset name after FROM", source.text)
            dataset = source.text

        if self.keyword() != "WHERE":
            raise UnsupportedConstruct("SELECT without WHERE")
        self.advance()
        self.expect_punct("{")

        patterns: List[TriplePattern] = []
        while True:
            token = self.peek()
            if token is None:
                raise QuerySyntaxError(len(self.text), "'}'")
            if token.kind == "punct" and token.text == "}":
                self.advance()
                break
            self.check_unsupported()
            patterns.append(self.parse_pattern())
            token = self.peek()
            if token is not None and token.kind == "punct" and token.text in (";", ","):
                raise UnsupportedConstruct(f"'{token.text}' pattern abbreviation")
            if token is not None and token.kind == "punct" and token.text == ".":
                self.advance()
            elif token is None or token.text != "}":
                raise QuerySyntaxError(self.position(), "'.' or '}'", token.text if token else "")

        trailing = self.peek()
        if trailing is not None:
            self.check_unsupported()
            raise QuerySyntaxError(trailing.position, "end of query", trailing.text)
        if not patterns:
            raise QuerySyntaxError(self.position(), "at least one triple pattern")

        used = {v for pattern in patterns for v in pattern.variables()}
        for var in select_vars:
            if var not in used:
                raise QuerySyntaxError(0, f"projected variable {var} to occur in WHERE")

        return QuerySpec(
            id=query_id,
            select_vars=tuple(select_vars),
            patterns=tuple(patterns),
            prefixes=dict(self.declared),
            dataset=dataset,
            text=self.text,
        )

    def parse_pattern(self) -> TriplePattern:
        start = self.position()
        subject = self.parse_term("subject")
        predicate = self.parse_term("predicate")
        obj = self.parse_term("object")
        if isinstance(subject, Term) and subject.kind is TermKind.LITERAL:
            raise QuerySyntaxError(start, "IRI or variable in subject position")
        if isinstance(predicate, Term) and not predicate.is_iri:
            raise QuerySyntaxError(start, "IRI or variable in predicate position")
        return TriplePattern(subject, predicate, obj)

    def parse_term(self, role: str) -> PatternTerm:
        token = self.advance()
        if token.kind == "var":
            return Variable(token.text[1:])
        if token.kind == "iri":
            return Term.iri(token.text[1:-1])
        if token.kind == "pname":
            return Term.iri(self.expand(token.text))
        if token.kind == "name" and token.text == "a" and role == "predicate":
            return Term.iri(RDF_TYPE)
        if token.kind == "name" and token.text in ("true", "false"):
            return Term.literal(token.text, XSD + "boolean")
        if token.kind == "number":
            datatype = "decimal" if "." in token.text else "integer"
            return Term.literal(token.text, XSD + datatype)
        if token.kind == "string":
            lexical = _unquote(token.text[1:-1])
            follow = self.peek()
            if follow is not None and follow.kind == "lang":
                self.advance()
                return Term.literal(lexical, language=follow.text[1:])
            if follow is not None and follow.kind == "dtype":
                self.advance()
                dtype = self.advance()
                if dtype.kind == "iri":
                    return Term.literal(lexical, dtype.text[1:-1])
                if dtype.kind == "pname":
                    return Term.literal(lexical, self.expand(dtype.text))
                raise QuerySyntaxError(dtype.position, "datatype IRI", dtype.text)
            return Term.literal(lexical)
        if token.kind == "name" and token.text.upper() in UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(token.text.upper())
        raise QuerySyntaxError(token.position, f"{role} term", token.text)

    def expand(self, pname: str) -> str:
        prefix, _, local = pname.partition(":")
        if prefix not in self.prefixes:
            raise UnknownPrefix(prefix)
        return self.prefixes[prefix] + local


def _unquote(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _STRING_ESCAPES.get(m.group(1), m.group(1)), body)


def parse_query(text: str, query_id: str = "", prefixes: Optional[Mapping[str, str]] = None) -> QuerySpec:
    """Parse the supported SPARQL subset into a QuerySpec"""
    return _Parser(text, prefixes or {}).parse(query_id)


def pattern_feature(pattern: TriplePattern) -> Optional[Feature]:
    """PO for bound predicate+object, P for bound predicate, None otherwise"""
    if not isinstance(pattern.predicate, Term):
        return None
    if isinstance(pattern.object, Term):
        return Feature.po(pattern.predicate, pattern.object)
    return Feature.p(pattern.predicate)


def _pair_joins(i: int, a: TriplePattern, j: int, b: TriplePattern) -> List[PatternJoin]:
    joins: List[PatternJoin] = []
    if isinstance(a.subject, Variable) and a.subject == b.subject:
        joins.append(PatternJoin(JoinKind.SSJ, i, j, a.subject))
    if isinstance(a.object, Variable) and a.object == b.object:
        joins.append(PatternJoin(JoinKind.OOJ, i, j, a.object))
    if isinstance(a.object, Variable) and a.object == b.subject:
        joins.append(PatternJoin(JoinKind.OSJ, i, j, a.object))
    if isinstance(b.object, Variable) and b.object == a.subject:
        joins.append(PatternJoin(JoinKind.OSJ, j, i, b.object))
    return joins


def extract_features(q: QuerySpec) -> QueryFeatures:
    """Features of every pattern plus variable-mediated joins between patterns"""
    pattern_features = tuple(pattern_feature(p) for p in q.patterns)

    pattern_joins: List[PatternJoin] = []
    for i, pattern in enumerate(q.patterns):
        if isinstance(pattern.object, Variable) and pattern.object == pattern.subject:
            pattern_joins.append(PatternJoin(JoinKind.OSJ, i, i, pattern.object))
    for (i, a), (j, b) in combinations(enumerate(q.patterns), 2):
        pattern_joins.extend(_pair_joins(i, a, j, b))

    joins = set()
    for join in pattern_joins:
        left, right = pattern_features[join.left], pattern_features[join.right]
        if left is not None and right is not None:
            joins.add(JoinFeature.make(join.kind, left, right, join.via))

    features = frozenset(f for f in pattern_features if f is not None)
    logger.debug("%s: %d features, %d joins", q.id, len(features), len(joins))
    return QueryFeatures(
        query_id=q.id,
        features=features,
        joins=frozenset(joins),
        pattern_features=pattern_features,
        pattern_joins=tuple(pattern_joins),
    )


def compact_iri(iri: str, prefixes: Mapping[str, str]) -> str:
    best: Optional[Tuple[str, str]] = None
    for prefix, namespace in prefixes.items():
        if iri.startswith(namespace) and (best is None or len(namespace) > len(best[1])):
            local = iri[len(namespace) :]
            if local == "" or _PN_LOCAL_FULL.match(local):
                best = (prefix, namespace)
    if best is None:
        return f"<{iri}>"
    return f"{best[0]}:{iri[len(best[1]):]}"


def render_term(term: PatternTerm, prefixes: Mapping[str, str]) -> str:
    if isinstance(term, Variable):
        return str(term)
    if term.is_iri:
        return compact_iri(term.lexical, prefixes)
    return term.n3()


def render_pattern(pattern: TriplePattern, prefixes: Mapping[str, str]) -> str:
    return " ".join(render_term(t, prefixes) for t in pattern.terms()) + " ."


def render_query(q: QuerySpec, body: Optional[Sequence[str]] = None) -> str:
    """SPARQL text for q; body lines replace the plain pattern list if given"""
    lines = [f"PREFIX {name}: <{iri}>" for name, iri in sorted(q.prefixes.items())]
    head = "SELECT " + " ".join(str(v) for v in q.select_vars)
    if q.dataset:
        head += f" FROM {q.dataset}"
    lines.append(head + " WHERE {")
    if body is None:
        body = [render_pattern(p, q.prefixes) for p in q.patterns]
    lines.extend(f"  {line}" for line in body)
    lines.append("}")
    return "\n".join(lines) + "\n"
