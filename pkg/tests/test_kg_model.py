#!/usr/bin/env python3
"""
Test suite for the in-memory triple store
"""

import io
import random

import pytest

from kgpart.errors import AllVariables, MalformedLine
from kgpart.kg_model import (
    KnowledgeGraph,
    from_text,
    group_by_owner,
    lookup,
    materialize_feature,
    parse_ntriples,
    parse_term,
    scan,
    serialize_ntriples,
)
from kgpart.terms import RDF_TYPE, Feature, Term, TermKind, Triple, TriplePattern, Variable

A, B, C, D = (Term.iri(f"http://{x}") for x in "abcd")
P, Q = Term.iri("http://p"), Term.iri("http://q")


class TestParseNTriples:
    """Test line-based N-Triples loading"""

    def test_minimal_statement(self):
        graph = from_text("<http://a> <http://p> <http://b> .\n")
        assert len(graph) == 1
        assert graph.index_p[graph.term_id(P)] == {0}

    def test_typed_literal_object(self):
        graph = from_text('<http://a> <http://p> "lit"^^<http://dt> .\n')
        obj = graph.triple(0).object
        assert obj.kind is TermKind.LITERAL
        assert obj.lexical == "lit"
        assert obj.datatype == "http://dt"

    def test_language_literal_and_blank_subject(self):
        graph = from_text('_:b1 <http://p> "hallo"@DE .\n')
        triple = graph.triple(0)
        assert triple.subject == Term.blank("b1")
        assert triple.object.language == "de"

    def test_duplicate_statement_kept_once(self):
        line = "<http://a> <http://p> <http://b> .\n"
        assert len(from_text(line + line)) == 1

    def test_comments_and_blank_lines_skipped(self):
        graph = from_text("# header\n\n<http://a> <http://p> <http://b> . # trailing\n")
        assert len(graph) == 1

    def test_missing_object(self):
        with pytest.raises(MalformedLine) as exc:
            from_text("<http://a> <http://p> .\n")
        assert exc.value.line_number == 1
        assert "missing object" in str(exc.value)

    def test_error_reports_line_number(self):
        text = "<http://a> <http://p> <http://b> .\n<http://a> <http://p> <http://b>\n"
        with pytest.raises(MalformedLine) as exc:
            from_text(text)
        assert exc.value.line_number == 2

    def test_literal_subject_rejected(self):
        with pytest.raises(MalformedLine):
            from_text('"x" <http://p> <http://b> .\n')

    def test_escapes_are_decoded(self):
        graph = from_text('<http://a> <http://p> "tab\\there \\u00e9" .\n')
        assert graph.triple(0).object.lexical == "tab\there é"

    def test_bytes_source(self):
        graph = parse_ntriples(io.BytesIO(b"<http://a> <http://p> <http://b> .\n"))
        assert len(graph) == 1

    def test_graph_is_immutable_after_load(self):
        graph = from_text("<http://a> <http://p> <http://b> .\n")
        with pytest.raises(RuntimeError):
            graph._add(Triple(A, P, C))


class TestParseTerm:
    """Test single-term parsing used by partition files"""

    def test_iri(self):
        assert parse_term("<http://a>") == A

    def test_literal_with_language(self):
        assert parse_term('"x"@en') == Term.literal("x", language="en")

    def test_trailing_garbage(self):
        with pytest.raises(MalformedLine):
            parse_term("<http://a> <http://b>")


class TestLookup:
    """Test pattern lookup against the linear-scan oracle"""

    def setup_method(self):
        self.graph = KnowledgeGraph.from_triples([Triple(A, P, B), Triple(C, P, D), Triple(A, Q, B)])

    def test_bound_predicate(self):
        assert lookup(self.graph, TriplePattern(Variable("s"), P, Variable("o"))) == {0, 1}

    def test_bound_subject(self):
        assert lookup(self.graph, TriplePattern(A, Variable("p"), Variable("o"))) == {0, 2}

    def test_unknown_term(self):
        x = Term.iri("http://x")
        assert lookup(self.graph, TriplePattern(x, P, Variable("o"))) == set()

    def test_all_variables_needs_scan(self):
        pattern = TriplePattern(Variable("s"), Variable("p"), Variable("o"))
        with pytest.raises(AllVariables):
            lookup(self.graph, pattern)
        assert scan(self.graph, pattern) == {0, 1, 2}

    def test_repeated_variable(self):
        graph = KnowledgeGraph.from_triples([Triple(A, P, A), Triple(A, P, B)])
        assert lookup(graph, TriplePattern(Variable("x"), P, Variable("x"))) == {0}

    def test_random_patterns_match_scan(self):
        rng = random.Random(7)
        nodes = [Term.iri(f"http://n{i}") for i in range(6)]
        preds = [Term.iri(f"http://p{i}") for i in range(3)]
        triples = {Triple(rng.choice(nodes), rng.choice(preds), rng.choice(nodes)) for _ in range(40)}
        graph = KnowledgeGraph.from_triples(sorted(triples, key=lambda t: (t.subject.n3(), t.predicate.n3(), t.object.n3())))
        for _ in range(100):
            terms = [
                rng.choice(nodes + [Variable("x"), Variable("y")]),
                rng.choice(preds + [Variable("z")]),
                rng.choice(nodes + [Variable("x"), Variable("w")]),
            ]
            pattern = TriplePattern(*terms)
            if not pattern.bound_positions():
                continue
            assert lookup(graph, pattern) == scan(graph, pattern)


class TestFeatures:
    """Test feature materialization and ownership"""

    def test_p_feature(self):
        graph = KnowledgeGraph.from_triples([Triple(A, P, B), Triple(C, P, D)])
        assert materialize_feature(graph, Feature.p(P)) == {0, 1}

    def test_po_feature(self):
        rdf_type = Term.iri(RDF_TYPE)
        t, u = Term.iri("http://T"), Term.iri("http://U")
        graph = KnowledgeGraph.from_triples([Triple(A, rdf_type, t), Triple(B, rdf_type, u)])
        assert materialize_feature(graph, Feature.po(rdf_type, t)) == {0}
        assert materialize_feature(graph, Feature.po(rdf_type, Term.iri("http://missing"))) == set()

    def test_po_takes_precedence_over_p(self):
        graph = KnowledgeGraph.from_triples([Triple(A, P, B), Triple(C, P, D), Triple(A, Q, B)])
        owned = group_by_owner(graph, [Feature.p(P), Feature.po(P, B)])
        assert owned[Feature.po(P, B)] == {0}
        assert owned[Feature.p(P)] == {1}
        # unfeatured predicates are grouped under their P feature
        assert owned[Feature.p(Q)] == {2}
        assert sum(len(ids) for ids in owned.values()) == len(graph)

    def test_predicates_sorted(self):
        graph = KnowledgeGraph.from_triples([Triple(A, Q, B), Triple(A, P, B)])
        assert graph.predicates() == [P, Q]


class TestSerialize:
    """Test canonical N-Triples output"""

    def test_round_trip_preserves_graph(self):
        text = '<http://b> <http://p> "x"@en .\n<http://a> <http://p> <http://b> .\n_:n <http://q> "1"^^<http://dt> .\n'
        graph = from_text(text)
        assert from_text(serialize_ntriples(graph).decode("utf-8")) == graph

    def test_output_is_sorted_and_stable(self):
        graph = from_text("<http://b> <http://p> <http://c> .\n<http://a> <http://p> <http://c> .\n")
        data = serialize_ntriples(graph)
        lines = data.decode("utf-8").splitlines()
        assert lines == sorted(lines)
        assert serialize_ntriples(graph) == data

    def test_writes_to_stream(self):
        graph = from_text("<http://a> <http://p> <http://b> .\n")
        stream = io.BytesIO()
        serialize_ntriples(graph, stream)
        assert stream.getvalue() == serialize_ntriples(graph)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
