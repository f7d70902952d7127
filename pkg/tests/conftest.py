"""Shared fixtures and small synthetic-graph builders."""

from __future__ import annotations

import random

import pytest

from kgfakes.kg import KnowledgeGraph

# Five facts over one relation; small enough to enumerate by hand, rich
# enough to exercise candidate exclusion, scoring, and extreme selection.
KG5_ROWS = [
    ("s1", "rel", "o1"),
    ("s2", "rel", "o1"),
    ("s2", "rel", "o2"),
    ("s3", "rel", "o2"),
    ("s3", "rel", "o3"),
]


@pytest.fixture
def kg5_rows():
    return list(KG5_ROWS)


@pytest.fixture
def kg5():
    return KnowledgeGraph.from_triples(KG5_ROWS)


def make_kg(rows, **kwargs) -> KnowledgeGraph:
    return KnowledgeGraph.from_triples(rows, **kwargs)


def random_rows(rng: random.Random, n_triples: int) -> list[tuple[str, str, str]]:
    """Random triple rows with varied relation fan-out and entity pool size.

    Duplicates are possible on purpose; parsing deduplicates and the oracle
    treats rows with set semantics, so both sides must agree regardless.
    """
    n_relations = rng.choice((1, 2, 3, 5, 8, 13, 21))
    n_categories = rng.randint(1, min(5, n_relations))
    n_entities = rng.randint(max(4, n_triples // 20), max(8, n_triples // 2))
    relations = [f"c{i % n_categories}.r{i}" for i in range(n_relations)]
    entities = [f"e{i}" for i in range(n_entities)]
    return [
        (rng.choice(entities), rng.choice(relations), rng.choice(entities))
        for _ in range(n_triples)
    ]
