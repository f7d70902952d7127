"""Triple parsing, interning, indexes, and description loading."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgfakes.errors import EmptyGraphError, EncodingError, ParseError
from kgfakes.kg import (
    Triple,
    category_of,
    load_descriptions,
    parse_triples,
)

from .conftest import make_kg, random_rows
from . import oracle


def dump_bytes(rows, comments=()):
    lines = [f"# {c}" for c in comments]
    lines += ["\t".join(row) for row in rows]
    return ("\n".join(lines) + "\n").encode("utf-8")


class TestParsing:
    def test_single_line(self):
        kg = parse_triples(b"Paris\tcapitalOf\tFrance\n")
        assert len(kg) == 1
        assert kg.contains_spo("Paris", "capitalOf", "France")
        assert kg.entity_count == 2
        assert kg.relation_count == 1

    def test_comments_and_counts(self, kg5_rows):
        kg = parse_triples(dump_bytes(kg5_rows, comments=["header", "another"]))
        assert len(kg) == 5
        assert kg.stats.comments_skipped == 2
        assert kg.stats.duplicates_dropped == 0

    def test_duplicates_deduplicated_and_counted(self, kg5_rows):
        kg = parse_triples(dump_bytes(kg5_rows + kg5_rows[:2]))
        assert len(kg) == 5
        assert kg.stats.duplicates_dropped == 2

    def test_denylist_drops_counted(self):
        rows = [
            ("a", "book.edition", "b"),
            ("a", "type.object.name", "b"),
            ("c", "common.topic.alias", "d"),
        ]
        kg = parse_triples(dump_bytes(rows))
        assert len(kg) == 1
        assert kg.stats.denylist_dropped == 2
        assert "type" in kg.category_denylist

    def test_custom_denylist(self):
        rows = [("a", "book.edition", "b"), ("a", "type.object.name", "b")]
        kg = parse_triples(dump_bytes(rows), denylist=())
        assert len(kg) == 2

    def test_malformed_line_reports_line_number(self):
        data = b"a\tp\tb\nnot-three-fields\n"
        with pytest.raises(ParseError) as exc_info:
            parse_triples(data)
        assert "line 2" in str(exc_info.value)

    def test_empty_field_rejected(self):
        with pytest.raises(ParseError) as exc_info:
            parse_triples(b"a\t\tb\n")
        assert "empty field" in str(exc_info.value)

    def test_invalid_utf8_reports_line_number(self):
        data = b"a\tp\tb\n\xff\xfe\tp\tc\n"
        with pytest.raises(EncodingError) as exc_info:
            parse_triples(data)
        assert "line 2" in str(exc_info.value)

    def test_empty_input_is_an_error(self):
        with pytest.raises(EmptyGraphError):
            parse_triples(b"")

    def test_all_lines_denylisted_is_an_error(self):
        with pytest.raises(EmptyGraphError):
            parse_triples(b"a\ttype.object.name\tb\n")

    def test_min_category_count_prunes(self):
        rows = [
            ("a", "book.edition", "b"),
            ("c", "book.edition", "d"),
            ("e", "film.runtime", "f"),
        ]
        kg = parse_triples(dump_bytes(rows), min_category_count=2)
        assert len(kg) == 2
        assert kg.stats.min_count_dropped == 1
        assert kg.category_counts() == {"book": 2}

    def test_crlf_tolerated(self):
        kg = parse_triples(b"a\tp\tb\r\n")
        assert kg.contains_spo("a", "p", "b")


class TestLookups:
    def test_contains_true_and_false(self, kg5):
        assert kg5.contains(kg5.resolve("s1", "rel", "o1"))
        assert not kg5.contains(kg5.resolve("s1", "rel", "o2"))

    def test_contains_spo_unknown_strings_mean_false(self):
        kg = parse_triples(b"Paris\tcapitalOf\tFrance\n")
        assert not kg.contains_spo("Paris", "capitalOf", "Germany")

    def test_contains_unresolvable_ids_raise(self, kg5):
        with pytest.raises(LookupError):
            kg5.contains(Triple(0, 0, 999))
        with pytest.raises(LookupError):
            kg5.contains(Triple(-1, 0, 0))

    def test_subjects_for(self, kg5):
        rel = kg5.find_relation("rel")
        o1 = kg5.find_entity("o1")
        subjects = kg5.subjects_for(rel, o1)
        assert {kg5.entity_name(s) for s in subjects} == {"s1", "s2"}

    def test_subjects_for_unseen_pair_is_empty(self, kg5):
        rel = kg5.find_relation("rel")
        s1 = kg5.find_entity("s1")
        # s1 never occurs as an object under rel.
        assert kg5.subjects_for(rel, s1) == frozenset()

    def test_three_triple_sharing(self):
        kg = make_kg([("a", "p", "x"), ("b", "p", "x"), ("a", "q", "x")])
        p = kg.find_relation("p")
        q = kg.find_relation("q")
        x = kg.find_entity("x")
        assert {kg.entity_name(s) for s in kg.subjects_for(p, x)} == {"a", "b"}
        assert {kg.entity_name(s) for s in kg.subjects_for(q, x)} == {"a"}

    def test_objects_for_relation(self, kg5):
        rel = kg5.find_relation("rel")
        assert {kg5.entity_name(o) for o in kg5.objects_for_relation(rel)} == {
            "o1",
            "o2",
            "o3",
        }

    def test_interning_is_bijective(self, kg5):
        for name in ("s1", "s2", "s3", "o1", "o2", "o3"):
            assert kg5.entity_name(kg5.find_entity(name)) == name

    def test_linked_entities_both_roles(self):
        kg = make_kg([("a", "p", "x"), ("y", "q", "a"), ("b", "p", "x")])
        a = kg.find_entity("a")
        linked = {kg.entity_name(e) for e in kg.linked_entities(a)}
        assert linked == {"x", "y"}


class TestCategories:
    def test_dotted_predicate(self):
        assert category_of("book.book_edition.publication_date") == "book"

    def test_dotless_predicate_is_own_category(self):
        assert category_of("capitalOf") == "capitalOf"

    def test_leading_dot_falls_back_to_whole_predicate(self):
        assert category_of(".weird") == ".weird"

    def test_category_counts(self):
        kg = make_kg(
            [("a", "book.x", "b"), ("c", "book.y", "d"), ("e", "film.z", "f")]
        )
        assert kg.category_counts() == {"book": 2, "film": 1}


class TestDescriptions:
    def test_attach_and_retrieve(self, kg5):
        lines = b'{"entity": "s1", "description": "first subject"}\n'
        kg = load_descriptions(lines, kg5)
        assert kg.description_for(kg.find_entity("s1")) == "first subject"
        assert kg.description_stats.attached == 1
        assert kg.description_stats.unknown_skipped == 0

    def test_unknown_entities_skipped_with_count(self, kg5):
        lines = (
            b'{"entity": "s1", "description": "known"}\n'
            b'{"entity": "nobody", "description": "unknown"}\n'
        )
        kg = load_descriptions(lines, kg5)
        assert kg.description_stats.attached == 1
        assert kg.description_stats.unknown_skipped == 1

    def test_empty_file_leaves_graph_unchanged(self, kg5):
        kg = load_descriptions(b"", kg5)
        assert kg.triples == kg5.triples
        assert kg.description_for(kg.find_entity("s1")) is None

    def test_malformed_json_reports_line_number(self, kg5):
        lines = b'{"entity": "s1", "description": "ok"}\n{broken\n'
        with pytest.raises(ParseError) as exc_info:
            load_descriptions(lines, kg5)
        assert "line 2" in str(exc_info.value)

    def test_wrong_shape_rejected(self, kg5):
        for bad in (
            b'["entity", "description"]\n',
            b'{"entity": "s1"}\n',
            b'{"entity": "s1", "description": 3}\n',
            b'{"entity": "s1", "description": "x", "extra": 1}\n',
        ):
            with pytest.raises(ParseError):
                load_descriptions(bad, kg5)

    def test_missing_description_reads_none(self, kg5):
        assert kg5.description_for(kg5.find_entity("s2")) is None


class TestOrderInsensitivity:
    def test_permuted_input_same_answers(self, kg5_rows):
        rng = random.Random(7)
        shuffled = list(kg5_rows)
        rng.shuffle(shuffled)
        kg_a = make_kg(kg5_rows)
        kg_b = make_kg(shuffled)
        for s, p, o in kg5_rows:
            assert kg_a.contains_spo(s, p, o) and kg_b.contains_spo(s, p, o)
        rel_a, rel_b = kg_a.find_relation("rel"), kg_b.find_relation("rel")
        for obj in ("o1", "o2", "o3"):
            subs_a = {
                kg_a.entity_name(s)
                for s in kg_a.subjects_for(rel_a, kg_a.find_entity(obj))
            }
            subs_b = {
                kg_b.entity_name(s)
                for s in kg_b.subjects_for(rel_b, kg_b.find_entity(obj))
            }
            assert subs_a == subs_b


@st.composite
def row_lists(draw, max_triples=40):
    n = draw(st.integers(min_value=1, max_value=max_triples))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_rows(random.Random(seed), n)


class TestProperties:
    @given(rows=row_lists())
    @settings(max_examples=80, deadline=None)
    def test_roundtrip_and_indexes_match_oracle(self, rows):
        kg = make_kg(rows)
        distinct = set(rows)
        # Round-trip: every input row is a fact, and nothing extra appears.
        assert len(kg) == len(distinct)
        for row in distinct:
            assert kg.contains_spo(*row)
        # Index contents equal the oracle's scans for every (relation, object).
        for (_, p, o) in distinct:
            rel, obj = kg.find_relation(p), kg.find_entity(o)
            indexed = {kg.entity_name(s) for s in kg.subjects_for(rel, obj)}
            assert indexed == oracle.scan_subjects(rows, p, o)
            objects = {kg.entity_name(x) for x in kg.objects_for_relation(rel)}
            assert objects == oracle.scan_objects(rows, p)

    @given(rows=row_lists(), shuffle_seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_subject_sets_survive_permutation(self, rows, shuffle_seed):
        shuffled = list(rows)
        random.Random(shuffle_seed).shuffle(shuffled)
        kg_a, kg_b = make_kg(rows), make_kg(shuffled)
        for (_, p, o) in set(rows):
            subs_a = {
                kg_a.entity_name(s)
                for s in kg_a.subjects_for(kg_a.find_relation(p), kg_a.find_entity(o))
            }
            subs_b = {
                kg_b.entity_name(s)
                for s in kg_b.subjects_for(kg_b.find_relation(p), kg_b.find_entity(o))
            }
            assert subs_a == subs_b
