"""Fake-object candidate mining and exact Jaccard plausibility scoring.

For a seed fact (s, r, o) the candidate pool holds every object o2 that occurs
under the same relation for at least one other subject, while (s, r, o2) is
not itself a fact. Each candidate is scored by the Jaccard similarity between
the subject set of the true object and the subject set of the candidate.
Scores are exact rationals so argmax/argmin selection never hinges on float
rounding, and every tie breaks on the entity string, which keeps mining output
byte-stable across runs and input reorderings.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from random import Random
from typing import Iterable, Sequence

from .errors import (
    ConsistencyError,
    InvalidCandidateError,
    NotAFactError,
    ParseError,
    UndefinedSimilarityError,
)
from .kg import EntityId, KnowledgeGraph, Triple, category_of

logger = logging.getLogger(__name__)

CANDIDATE_FIELDS = (
    "subject",
    "predicate",
    "object_real",
    "object_fake",
    "score_num",
    "score_den",
    "score",
    "tier",
    "category",
)


class Tier(str, Enum):
    """Which end of the plausibility range a candidate was picked from."""

    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class FakeCandidate:
    """A mined substitution: the seed fact plus a fake object and its score.

    ``tier`` is set by extremes mining and left None by top-k ranking.
    """

    seed: Triple
    fake_object: EntityId
    score: Fraction
    tier: Tier | None = None


@dataclass(frozen=True)
class ExtremePair:
    """Most and least plausible candidate for one seed; unset when none exist."""

    high: FakeCandidate | None
    low: FakeCandidate | None


@dataclass(frozen=True)
class SkippedSeed:
    seed: Triple
    reason: str


@dataclass(frozen=True)
class MineResult:
    candidates: list[FakeCandidate]
    skipped: list[SkippedSeed]


def jaccard(a: frozenset, b: frozenset) -> Fraction:
    """Exact |a & b| / |a | b|. Undefined when both sets are empty."""
    union = len(a | b)
    if union == 0:
        raise UndefinedSimilarityError("jaccard of two empty sets is undefined")
    return Fraction(len(a & b), union)


def candidate_objects(
    kg: KnowledgeGraph, seed: Triple, *, strict: bool = False
) -> frozenset[EntityId]:
    """All valid fake objects for a seed fact.

    An object qualifies when it occurs under the seed's relation for some
    other subject and substituting it does not produce a fact the graph
    already holds. With ``strict`` set, objects sharing any triple with the
    seed subject (in either role) are excluded as well.
    """
    _require_fact(kg, seed)
    s, r, o = seed
    linked = kg.linked_entities(s) if strict else None
    out: set[EntityId] = set()
    for o2 in kg.objects_for_relation(r):
        if o2 == o:
            continue
        # s absent from a non-empty subject set covers both conditions:
        # (s, r, o2) is not a fact, and some other subject asserts o2.
        if s in kg.subjects_for(r, o2):
            continue
        if linked is not None and o2 in linked:
            continue
        out.add(o2)
    return frozenset(out)


def plausibility_score(
    kg: KnowledgeGraph, seed: Triple, fake_object: EntityId, *, strict: bool = False
) -> Fraction:
    """Score one candidate substitution; always in [0, 1).

    The score compares the subject sets of the real and the fake object under
    the seed's relation. The seed subject sits in the first set and never in
    the second, so the union strictly exceeds the intersection and the score
    stays below one.
    """
    _require_fact(kg, seed)
    s, r, o = seed
    d_fake = kg.subjects_for(r, fake_object)
    if (
        fake_object == o
        or not d_fake
        or s in d_fake
        or (strict and fake_object in kg.linked_entities(s))
    ):
        raise InvalidCandidateError(
            f"{_object_label(kg, fake_object)} is not a valid fake object for"
            f" seed {_seed_label(kg, seed)}"
        )
    return jaccard(kg.subjects_for(r, o), d_fake)


def select_extremes(
    kg: KnowledgeGraph, seed: Triple, *, strict: bool = False
) -> ExtremePair:
    """Argmax and argmin candidates by score, ties broken on entity string.

    A single candidate fills both roles; an empty candidate set leaves both
    unset. Equal scores resolve to the lexicographically smaller entity string
    for high and low alike.
    """
    best_high: tuple[Fraction, str, EntityId] | None = None
    best_low: tuple[Fraction, str, EntityId] | None = None
    for score, name, oid in _scored_candidates(kg, seed, strict=strict):
        if (
            best_high is None
            or score > best_high[0]
            or (score == best_high[0] and name < best_high[1])
        ):
            best_high = (score, name, oid)
        if (
            best_low is None
            or score < best_low[0]
            or (score == best_low[0] and name < best_low[1])
        ):
            best_low = (score, name, oid)
    if best_high is None or best_low is None:
        return ExtremePair(high=None, low=None)
    return ExtremePair(
        high=FakeCandidate(seed, best_high[2], best_high[0], Tier.HIGH),
        low=FakeCandidate(seed, best_low[2], best_low[0], Tier.LOW),
    )


def rank_candidates(
    kg: KnowledgeGraph, seed: Triple, k: int, *, strict: bool = False
) -> list[FakeCandidate]:
    """Top k candidates by descending score, then ascending entity string."""
    if k < 1:
        raise ValueError("k must be at least 1")
    scored = sorted(
        _scored_candidates(kg, seed, strict=strict),
        key=lambda item: (-item[0], item[1]),
    )
    return [FakeCandidate(seed, oid, score, None) for score, _, oid in scored[:k]]


def mine(
    kg: KnowledgeGraph,
    seeds: Sequence[Triple],
    *,
    top_k: int | None = None,
    strict: bool = False,
) -> MineResult:
    """Mine candidates for many seeds, preserving seed order in the output.

    The default policy emits the high and low extreme per seed; seeds whose
    extremes collapse onto a single candidate are skipped so the two tiers
    stay symmetric. With ``top_k`` set, up to k ranked candidates per seed are
    emitted without tiers. Skips carry a machine-readable reason.
    """
    if top_k is not None and top_k < 1:
        raise ValueError("top_k must be at least 1 when given")
    for seed in seeds:
        _require_fact(kg, seed)
    candidates: list[FakeCandidate] = []
    skipped: list[SkippedSeed] = []
    for seed in seeds:
        if top_k is not None:
            ranked = rank_candidates(kg, seed, top_k, strict=strict)
            if not ranked:
                skipped.append(SkippedSeed(seed, "no candidate objects"))
                logger.info(
                    "skipping seed %s: no candidate objects", _seed_label(kg, seed)
                )
                continue
            candidates.extend(ranked)
            continue
        pair = select_extremes(kg, seed, strict=strict)
        if pair.high is None or pair.low is None:
            skipped.append(SkippedSeed(seed, "no candidate objects"))
            logger.info(
                "skipping seed %s: no candidate objects", _seed_label(kg, seed)
            )
            continue
        if pair.high.fake_object == pair.low.fake_object:
            skipped.append(SkippedSeed(seed, "extremes collapsed"))
            logger.info(
                "skipping seed %s: high and low extremes collapse onto one"
                " candidate",
                _seed_label(kg, seed),
            )
            continue
        candidates.append(pair.high)
        candidates.append(pair.low)
    return MineResult(candidates=candidates, skipped=skipped)


# -- seed selection --------------------------------------------------------


def sorted_seeds(kg: KnowledgeGraph) -> list[Triple]:
    """Every fact in the graph, ordered by its string form."""
    return [
        triple
        for _, triple in sorted(
            (kg.triple_strings(t), t) for t in kg.triples
        )
    ]


def sample_seeds(kg: KnowledgeGraph, per_category: int, rng: Random) -> list[Triple]:
    """Uniform per-category sample of seed facts.

    Categories are visited in sorted order and each category's pool is sorted
    by string form before sampling, so a fixed rng seed yields the same seeds
    no matter how the input dump was ordered.
    """
    if per_category < 1:
        raise ValueError("per_category must be at least 1")
    pools: dict[str, list[tuple[tuple[str, str, str], Triple]]] = defaultdict(list)
    for triple in kg.triples:
        category = kg.category_of_relation(triple.relation)
        pools[category].append((kg.triple_strings(triple), triple))
    seeds: list[Triple] = []
    for category in sorted(pools):
        pool = sorted(pools[category])
        picks = rng.sample(pool, min(per_category, len(pool)))
        seeds.extend(triple for _, triple in sorted(picks))
    return seeds


# -- serialization ---------------------------------------------------------


def candidate_row(kg: KnowledgeGraph, candidate: FakeCandidate) -> dict:
    """One JSON-ready mining output row, fields in documented order."""
    subject, predicate, object_real = kg.triple_strings(candidate.seed)
    return {
        "subject": subject,
        "predicate": predicate,
        "object_real": object_real,
        "object_fake": kg.entity_name(candidate.fake_object),
        "score_num": candidate.score.numerator,
        "score_den": candidate.score.denominator,
        "score": float(candidate.score),
        "tier": candidate.tier.value if candidate.tier is not None else None,
        "category": category_of(predicate),
    }


def write_candidates(
    path: Path | str, kg: KnowledgeGraph, candidates: Iterable[FakeCandidate]
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for candidate in candidates:
            handle.write(json.dumps(candidate_row(kg, candidate), ensure_ascii=False))
            handle.write("\n")


def write_skips(
    path: Path | str, kg: KnowledgeGraph, skipped: Iterable[SkippedSeed]
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for skip in skipped:
            subject, predicate, object_ = kg.triple_strings(skip.seed)
            row = {
                "subject": subject,
                "predicate": predicate,
                "object": object_,
                "reason": skip.reason,
            }
            handle.write(json.dumps(row, ensure_ascii=False))
            handle.write("\n")


def read_candidates(path: Path | str, kg: KnowledgeGraph) -> list[FakeCandidate]:
    """Read mining output back, re-resolving strings against the graph."""
    candidates: list[FakeCandidate] = []
    with open(path, "rb") as handle:
        for line_number, raw in enumerate(handle, start=1):
            text = raw.decode("utf-8").strip()
            if not text:
                continue
            try:
                row = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(
                    f"invalid JSON: {exc.msg}", line_number=line_number
                ) from exc
            missing = [f for f in CANDIDATE_FIELDS if f not in row]
            if missing:
                raise ParseError(
                    f"candidate row missing fields: {', '.join(missing)}",
                    line_number=line_number,
                )
            seed = kg.resolve(row["subject"], row["predicate"], row["object_real"])
            if seed is None or not kg.contains(seed):
                raise NotAFactError(
                    f"candidate row at line {line_number} names a seed"
                    f" ({row['subject']}, {row['predicate']}, {row['object_real']})"
                    " that is not a fact in the graph"
                )
            fake_id = kg.find_entity(row["object_fake"])
            if fake_id is None:
                raise ConsistencyError(
                    f"candidate row at line {line_number} names an unknown fake"
                    f" object {row['object_fake']!r}"
                )
            try:
                score = Fraction(row["score_num"], row["score_den"])
            except (TypeError, ZeroDivisionError) as exc:
                raise ParseError(
                    f"bad score at line {line_number}: {exc}",
                    line_number=line_number,
                ) from exc
            tier = Tier(row["tier"]) if row["tier"] is not None else None
            candidates.append(FakeCandidate(seed, fake_id, score, tier))
    return candidates


# -- internals -------------------------------------------------------------


def _scored_candidates(
    kg: KnowledgeGraph, seed: Triple, *, strict: bool
) -> list[tuple[Fraction, str, EntityId]]:
    _require_fact(kg, seed)
    s, r, o = seed
    d_real = kg.subjects_for(r, o)
    linked = kg.linked_entities(s) if strict else None
    scored: list[tuple[Fraction, str, EntityId]] = []
    for o2 in kg.objects_for_relation(r):
        if o2 == o:
            continue
        d_fake = kg.subjects_for(r, o2)
        if s in d_fake:
            continue
        if linked is not None and o2 in linked:
            continue
        scored.append((jaccard(d_real, d_fake), kg.entity_name(o2), o2))
    return scored


def _require_fact(kg: KnowledgeGraph, seed: Triple) -> None:
    if not kg.contains(seed):
        raise NotAFactError(f"seed {_seed_label(kg, seed)} is not a fact in the graph")


def _seed_label(kg: KnowledgeGraph, seed: Triple) -> str:
    subject, predicate, object_ = kg.triple_strings(seed)
    return f"({subject}, {predicate}, {object_})"


def _object_label(kg: KnowledgeGraph, entity_id: EntityId) -> str:
    try:
        return repr(kg.entity_name(entity_id))
    except LookupError:
        return f"entity id {entity_id}"
