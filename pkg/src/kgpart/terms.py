"""
Value types shared by the data model and the query analyzer.

Terms, variables, triple patterns and the workload features (P, PO) and
join features (SSJ, OOJ, OSJ) that partitioning is driven by.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Tuple, Union

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def escape_literal(value: str) -> str:
    """Escape a literal's lexical form for N-Triples / SPARQL output"""
    return "".join(_ESCAPES.get(ch, ch) for ch in value)


class TermKind(str, Enum):
    IRI = "iri"
    LITERAL = "literal"
    BLANK = "blank"


@dataclass(frozen=True)
class Term:
    """An RDF term; IRIs are stored without angle brackets"""

    kind: TermKind
    lexical: str
    datatype: Optional[str] = None
    language: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is TermKind.IRI:
            if not self.lexical or any(ch.isspace() for ch in self.lexical):
                raise ValueError(f"invalid IRI: {self.lexical!r}")
        elif self.kind is TermKind.BLANK:
            if not self.lexical:
                raise ValueError("blank node label must be non-empty")
        if self.kind is not TermKind.LITERAL and (self.datatype or self.language):
            raise ValueError("only literals carry a datatype or language tag")
        if self.datatype and self.language:
            raise ValueError("a literal has a datatype or a language tag, not both")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(TermKind.IRI, value)

    @classmethod
    def literal(
        cls, value: str, datatype: Optional[str] = None, language: Optional[str] = None
    ) -> "Term":
        return cls(TermKind.LITERAL, value, datatype, language.lower() if language else None)

    @classmethod
    def blank(cls, label: str) -> "Term":
        return cls(TermKind.BLANK, label)

    @property
    def is_iri(self) -> bool:
        return self.kind is TermKind.IRI

    def n3(self) -> str:
        """Canonical N-Triples rendering, also used as a stable sort key"""
        if self.kind is TermKind.IRI:
            return f"<{self.lexical}>"
        if self.kind is TermKind.BLANK:
            return f"_:{self.lexical}"
        text = f'"{escape_literal(self.lexical)}"'
        if self.language:
            return f"{text}@{self.language}"
        if self.datatype:
            return f"{text}^^<{self.datatype}>"
        return text

    def __str__(self) -> str:
        return self.n3()


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable name must be non-empty")

    def __str__(self) -> str:
        return f"?{self.name}"


PatternTerm = Union[Term, Variable]

POSITIONS = ("subject", "predicate", "object")


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self) -> None:
        if not self.predicate.is_iri:
            raise ValueError("triple predicate must be an IRI")
        if self.subject.kind is TermKind.LITERAL:
            raise ValueError("triple subject must be an IRI or blank node")


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def terms(self) -> Tuple[PatternTerm, PatternTerm, PatternTerm]:
        return (self.subject, self.predicate, self.object)

    def variables(self) -> Iterator[Variable]:
        for term in self.terms():
            if isinstance(term, Variable):
                yield term

    def bound_positions(self) -> Tuple[str, ...]:
        return tuple(
            name for name, term in zip(POSITIONS, self.terms()) if isinstance(term, Term)
        )

    def __str__(self) -> str:
        return " ".join(str(t) for t in self.terms()) + " ."


class FeatureKind(str, Enum):
    P = "P"
    PO = "PO"


@dataclass(frozen=True)
class Feature:
    """A predicate (P) or predicate-object (PO) workload feature"""

    kind: FeatureKind
    predicate: Term
    object: Optional[Term] = None

    def __post_init__(self) -> None:
        if (self.kind is FeatureKind.PO) != (self.object is not None):
            raise ValueError("object is present iff the feature kind is PO")
        if not self.predicate.is_iri:
            raise ValueError("feature predicate must be an IRI")

    @classmethod
    def p(cls, predicate: Term) -> "Feature":
        return cls(FeatureKind.P, predicate)

    @classmethod
    def po(cls, predicate: Term, obj: Term) -> "Feature":
        return cls(FeatureKind.PO, predicate, obj)

    @property
    def parent(self) -> "Feature":
        """The P feature whose triples this feature is carved from"""
        return Feature.p(self.predicate)

    def encode(self) -> str:
        if self.object is None:
            return f"P|{self.predicate.n3()}"
        return f"PO|{self.predicate.n3()}|{self.object.n3()}"

    def sort_key(self) -> str:
        return self.encode()

    def __str__(self) -> str:
        if self.object is None:
            return f"P({self.predicate.lexical})"
        return f"PO({self.predicate.lexical} -> {self.object.lexical})"


class JoinKind(str, Enum):
    SSJ = "SSJ"
    OOJ = "OOJ"
    OSJ = "OSJ"


@dataclass(frozen=True)
class JoinFeature:
    """A variable-mediated join between two features of one query.

    OSJ is directional (left's object is right's subject); SSJ and OOJ are
    stored with (left, right) in encoding order.
    """

    kind: JoinKind
    left: Feature
    right: Feature
    via: Variable

    @classmethod
    def make(cls, kind: JoinKind, left: Feature, right: Feature, via: Variable) -> "JoinFeature":
        if kind is not JoinKind.OSJ and right.encode() < left.encode():
            left, right = right, left
        return cls(kind, left, right, via)

    def sort_key(self) -> Tuple[str, str, str, str]:
        return (self.kind.value, self.left.encode(), self.right.encode(), self.via.name)
