"""Tab-separated triple dumps parsed into an immutable, index-backed graph.

Entity and predicate strings are interned to integer ids once, at build time.
Two inverted indexes are kept alongside the triple set: subjects keyed by
(relation, object), and objects keyed by relation. Those two lookups are what
candidate mining and plausibility scoring lean on, so they are built up front
and never mutated afterwards.
"""

from __future__ import annotations

import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator, NamedTuple

from .errors import EmptyGraphError, EncodingError, ParseError

EntityId = int
RelationId = int

# Categories dropped by default: graph plumbing rather than world knowledge.
DEFAULT_DENYLIST = frozenset(
    {"type", "base", "common", "freebase", "user", "kg", "dataworld"}
)

COMMENT_PREFIX = "#"

_EMPTY: frozenset = frozenset()


class Triple(NamedTuple):
    """One (subject, relation, object) fact in interned-id form."""

    subject: EntityId
    relation: RelationId
    object: EntityId


def category_of(predicate: str) -> str:
    """Leading dotted segment of a predicate.

    A dotless predicate is its own category, and so is one that starts with a
    dot (the empty head would make a useless category name).
    """
    head = predicate.split(".", 1)[0]
    return head if head else predicate


@dataclass(frozen=True)
class ParseStats:
    """Bookkeeping from one ingest pass."""

    kept: int = 0
    duplicates_dropped: int = 0
    denylist_dropped: int = 0
    min_count_dropped: int = 0
    comments_skipped: int = 0


@dataclass(frozen=True)
class DescriptionStats:
    attached: int = 0
    unknown_skipped: int = 0


def iter_triple_rows(
    source: BinaryIO | bytes | Iterable[bytes],
) -> Iterator[tuple[int, tuple[str, str, str]]]:
    """Yield (line_number, (subject, predicate, object)) from a triple dump.

    Comment lines (leading ``#``) are passed over silently here; callers that
    need the count use :func:`parse_triples`. Malformed lines raise ParseError
    with the offending line number, undecodable bytes raise EncodingError.
    """
    for line_number, text in _decoded_lines(source):
        if text.startswith(COMMENT_PREFIX):
            continue
        yield line_number, _split_row(text, line_number)


def parse_triples(
    source: BinaryIO | bytes | Iterable[bytes],
    denylist: Iterable[str] = DEFAULT_DENYLIST,
    *,
    min_category_count: int = 0,
) -> "KnowledgeGraph":
    """Parse a TSV triple dump (UTF-8, one ``s<TAB>p<TAB>o`` fact per line).

    Duplicate lines are deduplicated, denylisted categories are dropped, and
    both are counted in the returned graph's ``stats``. ``min_category_count``
    optionally prunes categories with fewer surviving triples than the
    threshold. An input that leaves no triples at all raises EmptyGraphError.
    """
    rows: list[tuple[str, str, str]] = []
    comments = 0
    for line_number, text in _decoded_lines(source):
        if text.startswith(COMMENT_PREFIX):
            comments += 1
            continue
        rows.append(_split_row(text, line_number))
    return KnowledgeGraph._build(
        rows,
        denylist,
        min_category_count=min_category_count,
        comments_skipped=comments,
    )


def load_descriptions(
    source: BinaryIO | bytes | Iterable[bytes], kg: "KnowledgeGraph"
) -> "KnowledgeGraph":
    """Attach entity descriptions from a JSON-lines sidecar.

    Each line must be an object with exactly the string fields ``entity`` and
    ``description``. Entities the graph never interned are skipped and counted;
    an empty file leaves the graph unchanged. Returns a new graph sharing the
    triple structure of ``kg``.
    """
    descriptions = dict(kg._descriptions)
    attached = 0
    skipped = 0
    for line_number, text in _decoded_lines(source):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"invalid JSON: {exc.msg}", line_number=line_number
            ) from exc
        if (
            not isinstance(obj, dict)
            or set(obj) != {"entity", "description"}
            or not all(isinstance(value, str) for value in obj.values())
        ):
            raise ParseError(
                "expected an object with exactly the string fields"
                " 'entity' and 'description'",
                line_number=line_number,
            )
        entity_id = kg.find_entity(obj["entity"])
        if entity_id is None:
            skipped += 1
            continue
        descriptions[entity_id] = obj["description"]
        attached += 1
    return kg._clone_with_descriptions(
        descriptions, DescriptionStats(attached=attached, unknown_skipped=skipped)
    )


class KnowledgeGraph:
    """Immutable triple store with the set lookups plausibility scoring needs.

    Instances come from :func:`parse_triples` or :meth:`from_triples` and are
    never mutated afterwards, so concurrent readers need no locking. The two
    derived caches (adjacency, category counts) are filled lazily but do not
    change observable state.
    """

    __slots__ = (
        "_entity_names",
        "_entity_ids",
        "_relation_names",
        "_relation_ids",
        "_triples",
        "_subjects_by_ro",
        "_objects_by_relation",
        "_descriptions",
        "category_denylist",
        "stats",
        "description_stats",
        "_adjacent",
        "_category_counts",
    )

    def __init__(
        self,
        entity_names: list[str],
        entity_ids: dict[str, EntityId],
        relation_names: list[str],
        relation_ids: dict[str, RelationId],
        triples: frozenset[Triple],
        subjects_by_ro: dict[tuple[RelationId, EntityId], frozenset[EntityId]],
        objects_by_relation: dict[RelationId, frozenset[EntityId]],
        category_denylist: frozenset[str],
        stats: ParseStats,
    ):
        # Internal constructor; use parse_triples() or from_triples().
        self._entity_names = entity_names
        self._entity_ids = entity_ids
        self._relation_names = relation_names
        self._relation_ids = relation_ids
        self._triples = triples
        self._subjects_by_ro = subjects_by_ro
        self._objects_by_relation = objects_by_relation
        self._descriptions: dict[EntityId, str] = {}
        self.category_denylist = category_denylist
        self.stats = stats
        self.description_stats: DescriptionStats | None = None
        self._adjacent: dict[EntityId, frozenset[EntityId]] | None = None
        self._category_counts: dict[str, int] | None = None

    @classmethod
    def from_triples(
        cls,
        rows: Iterable[tuple[str, str, str]],
        denylist: Iterable[str] = DEFAULT_DENYLIST,
        *,
        min_category_count: int = 0,
    ) -> "KnowledgeGraph":
        """Build a graph from already-split (subject, predicate, object) rows."""
        return cls._build(
            rows, denylist, min_category_count=min_category_count, comments_skipped=0
        )

    @classmethod
    def _build(
        cls,
        rows: Iterable[tuple[str, str, str]],
        denylist: Iterable[str],
        *,
        min_category_count: int,
        comments_skipped: int,
    ) -> "KnowledgeGraph":
        denyset = frozenset(denylist)
        unique: list[tuple[str, str, str]] = []
        seen: set[tuple[str, str, str]] = set()
        duplicates = 0
        denied = 0
        for row in rows:
            if category_of(row[1]) in denyset:
                denied += 1
                continue
            if row in seen:
                duplicates += 1
                continue
            seen.add(row)
            unique.append(row)
        del seen

        min_dropped = 0
        if min_category_count > 1:
            counts = Counter(category_of(p) for _, p, _ in unique)
            keep = {c for c, n in counts.items() if n >= min_category_count}
            survivors = [row for row in unique if category_of(row[1]) in keep]
            min_dropped = len(unique) - len(survivors)
            unique = survivors

        if not unique:
            raise EmptyGraphError("no triples survived parsing and filtering")

        entity_names: list[str] = []
        entity_ids: dict[str, EntityId] = {}
        relation_names: list[str] = []
        relation_ids: dict[str, RelationId] = {}
        triples: set[Triple] = set()
        subjects_by_ro: dict[tuple[RelationId, EntityId], set[EntityId]] = defaultdict(set)
        objects_by_relation: dict[RelationId, set[EntityId]] = defaultdict(set)

        for s, p, o in unique:
            sid = entity_ids.get(s)
            if sid is None:
                sid = len(entity_names)
                entity_ids[s] = sid
                entity_names.append(s)
            rid = relation_ids.get(p)
            if rid is None:
                rid = len(relation_names)
                relation_ids[p] = rid
                relation_names.append(p)
            oid = entity_ids.get(o)
            if oid is None:
                oid = len(entity_names)
                entity_ids[o] = oid
                entity_names.append(o)
            triples.add(Triple(sid, rid, oid))
            subjects_by_ro[(rid, oid)].add(sid)
            objects_by_relation[rid].add(oid)

        stats = ParseStats(
            kept=len(triples),
            duplicates_dropped=duplicates,
            denylist_dropped=denied,
            min_count_dropped=min_dropped,
            comments_skipped=comments_skipped,
        )
        return cls(
            entity_names,
            entity_ids,
            relation_names,
            relation_ids,
            frozenset(triples),
            {key: frozenset(subs) for key, subs in subjects_by_ro.items()},
            {key: frozenset(objs) for key, objs in objects_by_relation.items()},
            denyset,
            stats,
        )

    # -- lookups -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._triples)

    def __repr__(self) -> str:
        return (
            f"KnowledgeGraph(triples={len(self._triples)},"
            f" entities={len(self._entity_names)},"
            f" relations={len(self._relation_names)})"
        )

    @property
    def triples(self) -> frozenset[Triple]:
        return self._triples

    @property
    def entity_count(self) -> int:
        return len(self._entity_names)

    @property
    def relation_count(self) -> int:
        return len(self._relation_names)

    def entity_name(self, entity_id: EntityId) -> str:
        if 0 <= entity_id < len(self._entity_names):
            return self._entity_names[entity_id]
        raise LookupError(f"entity id {entity_id} does not resolve in this graph")

    def relation_name(self, relation_id: RelationId) -> str:
        if 0 <= relation_id < len(self._relation_names):
            return self._relation_names[relation_id]
        raise LookupError(f"relation id {relation_id} does not resolve in this graph")

    def find_entity(self, name: str) -> EntityId | None:
        return self._entity_ids.get(name)

    def find_relation(self, name: str) -> RelationId | None:
        return self._relation_ids.get(name)

    def resolve(self, subject: str, predicate: str, object_: str) -> Triple | None:
        """Map a string triple onto interned ids; None if any part is unknown."""
        sid = self._entity_ids.get(subject)
        rid = self._relation_ids.get(predicate)
        oid = self._entity_ids.get(object_)
        if sid is None or rid is None or oid is None:
            return None
        return Triple(sid, rid, oid)

    def triple_strings(self, triple: Triple) -> tuple[str, str, str]:
        return (
            self.entity_name(triple.subject),
            self.relation_name(triple.relation),
            self.entity_name(triple.object),
        )

    def contains(self, triple: Triple) -> bool:
        """Exact membership for an id-form triple; ids must resolve here."""
        self.entity_name(triple.subject)
        self.relation_name(triple.relation)
        self.entity_name(triple.object)
        return triple in self._triples

    def contains_spo(self, subject: str, predicate: str, object_: str) -> bool:
        """Membership at the string level; unknown strings simply mean False."""
        triple = self.resolve(subject, predicate, object_)
        return triple is not None and triple in self._triples

    def subjects_for(self, relation: RelationId, object_: EntityId) -> frozenset[EntityId]:
        """All subjects s with (s, relation, object_) in the graph."""
        return self._subjects_by_ro.get((relation, object_), _EMPTY)

    def objects_for_relation(self, relation: RelationId) -> frozenset[EntityId]:
        """All objects that occur under the relation, over all subjects."""
        return self._objects_by_relation.get(relation, _EMPTY)

    def category_of_relation(self, relation: RelationId) -> str:
        return category_of(self.relation_name(relation))

    def category_counts(self) -> dict[str, int]:
        """Triple counts per category, in sorted category order."""
        if self._category_counts is None:
            counts: Counter[str] = Counter()
            for triple in self._triples:
                counts[self.category_of_relation(triple.relation)] += 1
            self._category_counts = dict(sorted(counts.items()))
        return dict(self._category_counts)

    def description_for(self, entity_id: EntityId) -> str | None:
        return self._descriptions.get(entity_id)

    def linked_entities(self, entity_id: EntityId) -> frozenset[EntityId]:
        """Entities that share any triple with the given one, in either role.

        Backed by a lazily built co-occurrence map; used by strict candidate
        exclusion. The cache is derived state only, the graph stays immutable.
        """
        if self._adjacent is None:
            adjacent: dict[EntityId, set[EntityId]] = defaultdict(set)
            for s, _, o in self._triples:
                adjacent[s].add(o)
                adjacent[o].add(s)
            self._adjacent = {e: frozenset(v) for e, v in adjacent.items()}
        return self._adjacent.get(entity_id, _EMPTY)

    # -- construction helpers ---------------------------------------------

    def _clone_with_descriptions(
        self, descriptions: dict[EntityId, str], stats: DescriptionStats
    ) -> "KnowledgeGraph":
        clone = KnowledgeGraph(
            self._entity_names,
            self._entity_ids,
            self._relation_names,
            self._relation_ids,
            self._triples,
            self._subjects_by_ro,
            self._objects_by_relation,
            self.category_denylist,
            self.stats,
        )
        clone._descriptions = descriptions
        clone.description_stats = stats
        return clone


def _split_row(text: str, line_number: int) -> tuple[str, str, str]:
    fields = text.split("\t")
    if len(fields) != 3:
        raise ParseError(
            f"expected 3 tab-separated fields, got {len(fields)}",
            line_number=line_number,
        )
    if any(not field for field in fields):
        raise ParseError("empty field in triple line", line_number=line_number)
    return (fields[0], fields[1], fields[2])


def _decoded_lines(
    source: BinaryIO | bytes | Iterable[bytes],
) -> Iterator[tuple[int, str]]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(bytes(source))
    for line_number, raw in enumerate(source, start=1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(
                f"invalid UTF-8: {exc}", line_number=line_number
            ) from exc
        yield line_number, text.rstrip("\n").rstrip("\r")
