"""Fact records, verdict parsing, and sliced detection-accuracy reports.

A fact record is one statement a judge will see: the seed fact, the object
actually used (real or substituted), the generated statement text, and the
bookkeeping needed to slice results by judge, generator, category, and
plausibility tier. Accuracy is carried as an exact rational everywhere and
only formatted to percentages at the CSV boundary.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConsistencyError, NotAFactError, ParseError
from .gateway import (
    CompletionFailure,
    CompletionRequest,
    EndpointConfig,
    Provider,
    complete_batch,
)
from .kg import KnowledgeGraph, Triple, category_of
from .miner import FakeCandidate, Tier
from .prompts import NO_DESCRIPTION, build_generation_prompt

logger = logging.getLogger(__name__)

JURY_JUDGE = "jury:majority"

RECORD_FIELDS = (
    "id",
    "subject",
    "predicate",
    "object_real",
    "object_used",
    "label",
    "tier",
    "score_num",
    "score_den",
    "category",
    "statement",
    "generator_model",
)

VERDICT_FIELDS = ("record_id", "judge_model", "raw_output", "parsed")


class Label(str, Enum):
    REAL = "real"
    FAKE = "fake"


class Judgment(str, Enum):
    REAL = "real"
    FAKE = "fake"
    INVALID = "invalid"


class InvalidPolicy(str, Enum):
    """How unparseable verdicts enter the accuracy denominator."""

    EXCLUDE = "exclude"
    COUNT_WRONG = "count-wrong"


@dataclass(frozen=True)
class FactRecord:
    """One judged statement with full provenance."""

    id: str
    subject: str
    predicate: str
    object_real: str
    object_used: str
    label: Label
    tier: Tier | None
    score: Fraction | None
    category: str
    statement: str
    generator_model: str

    def __post_init__(self):
        real = self.object_used == self.object_real
        if real != (self.label is Label.REAL) or real != (self.tier is None):
            raise ValueError(
                "label, tier, and object_used must agree: a real record uses"
                " the real object and carries no tier"
            )
        if not self.statement:
            raise ValueError("statement must be non-empty")


@dataclass(frozen=True)
class Verdict:
    record_id: str
    judge_model: str
    raw_output: str
    parsed: Judgment


@dataclass(frozen=True)
class AssembleSkip:
    subject: str
    predicate: str
    object_used: str
    tier: str | None
    reason: str


@dataclass(frozen=True)
class AssembleResult:
    records: list[FactRecord]
    skipped: list[AssembleSkip]


def record_id(
    subject: str,
    predicate: str,
    object_used: str,
    tier: Tier | None,
    generator_model: str,
) -> str:
    """Stable id for the (triple as used, tier, generator) combination."""
    key = "\x1f".join(
        (
            subject,
            predicate,
            object_used,
            tier.value if tier is not None else "",
            generator_model,
        )
    )
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


_BRACKETED = re.compile(r"\[(real|fake)\]", re.IGNORECASE)
_LEADING = re.compile(r"^(real|fake)\b", re.IGNORECASE)


def parse_verdict(raw_output: str) -> Judgment:
    """Map raw judge output onto real/fake/invalid.

    The first bracketed [Real] or [Fake] token wins, case-insensitively; a
    bare leading real/fake word is accepted as a fallback. Anything else is
    invalid.
    """
    match = _BRACKETED.search(raw_output)
    if match is None:
        match = _LEADING.match(raw_output.strip())
    if match is None:
        return Judgment.INVALID
    return Judgment(match.group(1).lower())


def assemble_records(
    candidates: Sequence[FakeCandidate],
    real_seeds: Sequence[Triple],
    kg: KnowledgeGraph,
    endpoint: EndpointConfig,
    *,
    generator_model: str,
    temperature: float = 0.7,
    max_tokens: int = 256,
    parallelism: int = 1,
    provider: Provider | None = None,
) -> AssembleResult:
    """Generate one statement per fake candidate and per real seed fact.

    Labels are assigned by graph membership of the triple as used, so a
    candidate whose substitution turns out to be a fact is skipped rather
    than mislabeled. Gateway failures and empty generations become skip
    entries; they never abort the batch.
    """
    for seed in real_seeds:
        if not kg.contains(seed):
            subject, predicate, object_ = kg.triple_strings(seed)
            raise NotAFactError(
                f"real seed ({subject}, {predicate}, {object_}) is not a fact"
                " in the graph"
            )

    drafts: list[_Draft] = []
    skipped: list[AssembleSkip] = []
    seen_ids: set[str] = set()

    def push(draft: _Draft) -> None:
        if draft.rid in seen_ids:
            skipped.append(draft.skip("duplicate record id"))
            return
        seen_ids.add(draft.rid)
        drafts.append(draft)

    for candidate in candidates:
        if candidate.tier is None:
            raise ConsistencyError(
                "records require tiered candidates; mine with the extremes"
                " policy rather than top-k ranking"
            )
        subject, predicate, object_real = kg.triple_strings(candidate.seed)
        object_used = kg.entity_name(candidate.fake_object)
        fake_triple = Triple(
            candidate.seed.subject, candidate.seed.relation, candidate.fake_object
        )
        draft = _Draft(
            subject=subject,
            predicate=predicate,
            object_real=object_real,
            object_used=object_used,
            label=Label.FAKE,
            tier=candidate.tier,
            score=candidate.score,
            subject_id=candidate.seed.subject,
            rid=record_id(subject, predicate, object_used, candidate.tier, generator_model),
        )
        if kg.contains(fake_triple):
            skipped.append(draft.skip("substituted object names a fact in the graph"))
            continue
        push(draft)

    for seed in real_seeds:
        subject, predicate, object_ = kg.triple_strings(seed)
        push(
            _Draft(
                subject=subject,
                predicate=predicate,
                object_real=object_,
                object_used=object_,
                label=Label.REAL,
                tier=None,
                score=None,
                subject_id=seed.subject,
                rid=record_id(subject, predicate, object_, None, generator_model),
            )
        )

    requests = []
    for draft in drafts:
        description = kg.description_for(draft.subject_id) or NO_DESCRIPTION
        prompt = build_generation_prompt(
            draft.subject, description, draft.predicate, draft.object_used
        )
        requests.append(
            CompletionRequest(
                prompt=prompt,
                model_name=generator_model,
                temperature=temperature,
                max_tokens=max_tokens,
                request_id=draft.rid,
            )
        )

    outcomes = complete_batch(requests, endpoint, parallelism, provider=provider)
    records: list[FactRecord] = []
    for draft, outcome in zip(drafts, outcomes):
        if isinstance(outcome, CompletionFailure):
            skipped.append(draft.skip(f"{outcome.kind}: {outcome.message}"))
            continue
        statement = outcome.raw_text.strip()
        if not statement:
            skipped.append(draft.skip("generator produced an empty statement"))
            continue
        records.append(
            FactRecord(
                id=draft.rid,
                subject=draft.subject,
                predicate=draft.predicate,
                object_real=draft.object_real,
                object_used=draft.object_used,
                label=draft.label,
                tier=draft.tier,
                score=draft.score,
                category=category_of(draft.predicate),
                statement=statement,
                generator_model=generator_model,
            )
        )
    return AssembleResult(records=records, skipped=skipped)


@dataclass(frozen=True)
class _Draft:
    subject: str
    predicate: str
    object_real: str
    object_used: str
    label: Label
    tier: Tier | None
    score: Fraction | None
    subject_id: int
    rid: str

    def skip(self, reason: str) -> AssembleSkip:
        return AssembleSkip(
            subject=self.subject,
            predicate=self.predicate,
            object_used=self.object_used,
            tier=self.tier.value if self.tier is not None else None,
            reason=reason,
        )


# -- evaluation ------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    """Tallies for one (judge, generator, category, tier, label) slice.

    The generator dimension goes beyond the minimal slice tuple, but without
    it the judge-by-generator summary table cannot be assembled.
    """

    judge_model: str
    generator_model: str
    category: str
    tier: Tier | None
    label: Label
    n: int
    n_correct: int
    n_invalid: int
    accuracy: Fraction | None


_ANY = object()


@dataclass(frozen=True)
class DetectionReport:
    rows: tuple[ReportRow, ...]
    invalid_policy: InvalidPolicy

    def aggregate(
        self,
        *,
        judge_model=_ANY,
        generator_model=_ANY,
        category=_ANY,
        tier=_ANY,
        label=_ANY,
    ) -> tuple[int, int, int, Fraction | None]:
        """Sum matching rows and recompute accuracy over the sums.

        Returns (n, n_correct, n_invalid, accuracy); accuracy is None when the
        filtered slice has no evaluable verdicts. Because per-row accuracies
        share the same exact tallies, this equals the n-weighted mean of the
        matching rows' accuracies.
        """
        n = n_correct = n_invalid = 0
        for row in self.rows:
            if judge_model is not _ANY and row.judge_model != judge_model:
                continue
            if generator_model is not _ANY and row.generator_model != generator_model:
                continue
            if category is not _ANY and row.category != category:
                continue
            if tier is not _ANY and row.tier != tier:
                continue
            if label is not _ANY and row.label != label:
                continue
            n += row.n
            n_correct += row.n_correct
            n_invalid += row.n_invalid
        return (n, n_correct, n_invalid, _accuracy(n, n_correct, n_invalid, self.invalid_policy))

    def judges(self) -> list[str]:
        return sorted({row.judge_model for row in self.rows})

    def generators(self) -> list[str]:
        return sorted(
            {row.generator_model for row in self.rows if row.label is Label.FAKE}
        )


def evaluate(
    records: Sequence[FactRecord],
    verdicts: Sequence[Verdict],
    invalid_policy: InvalidPolicy = InvalidPolicy.EXCLUDE,
    *,
    jury: bool = False,
) -> DetectionReport:
    """Tally verdicts into per-slice accuracy rows.

    Every verdict must reference a known record and no (record, judge) pair
    may appear twice. Slices left with no evaluable verdicts get accuracy
    None rather than zero. With ``jury`` set, a synthetic majority-vote judge
    is added over the real judges' parsed verdicts; ties come out invalid.
    """
    by_id: dict[str, FactRecord] = {}
    for record in records:
        if record.id in by_id:
            raise ConsistencyError(f"duplicate record id {record.id}")
        by_id[record.id] = record

    seen: set[tuple[str, str]] = set()
    all_verdicts = list(verdicts)
    for verdict in all_verdicts:
        if verdict.record_id not in by_id:
            raise ConsistencyError(
                f"verdict references unknown record id {verdict.record_id}"
            )
        key = (verdict.record_id, verdict.judge_model)
        if key in seen:
            raise ConsistencyError(
                f"duplicate verdict for record {verdict.record_id} from judge"
                f" {verdict.judge_model}"
            )
        seen.add(key)

    if jury:
        all_verdicts.extend(_jury_verdicts(all_verdicts, by_id))

    tallies: dict[tuple, list[int]] = defaultdict(lambda: [0, 0, 0])
    for verdict in all_verdicts:
        record = by_id[verdict.record_id]
        key = (
            verdict.judge_model,
            record.generator_model,
            record.category,
            record.tier,
            record.label,
        )
        tally = tallies[key]
        tally[0] += 1
        if verdict.parsed is Judgment.INVALID:
            tally[2] += 1
        elif verdict.parsed.value == record.label.value:
            tally[1] += 1

    rows = []
    for key in sorted(tallies, key=_row_sort_key):
        judge_model, generator_model, category, tier, label = key
        n, n_correct, n_invalid = tallies[key]
        rows.append(
            ReportRow(
                judge_model=judge_model,
                generator_model=generator_model,
                category=category,
                tier=tier,
                label=label,
                n=n,
                n_correct=n_correct,
                n_invalid=n_invalid,
                accuracy=_accuracy(n, n_correct, n_invalid, invalid_policy),
            )
        )
    return DetectionReport(rows=tuple(rows), invalid_policy=invalid_policy)


def _jury_verdicts(
    verdicts: Sequence[Verdict], by_id: dict[str, FactRecord]
) -> list[Verdict]:
    votes: dict[str, list[Judgment]] = {rid: [] for rid in by_id}
    for verdict in verdicts:
        votes[verdict.record_id].append(verdict.parsed)
    out = []
    for rid, cast in votes.items():
        if not cast:
            continue
        real = sum(1 for v in cast if v is Judgment.REAL)
        fake = sum(1 for v in cast if v is Judgment.FAKE)
        if real > fake:
            parsed = Judgment.REAL
        elif fake > real:
            parsed = Judgment.FAKE
        else:
            parsed = Judgment.INVALID
        out.append(
            Verdict(
                record_id=rid,
                judge_model=JURY_JUDGE,
                raw_output=f"votes real={real} fake={fake} invalid={len(cast) - real - fake}",
                parsed=parsed,
            )
        )
    return out


_TIER_ORDER = {Tier.HIGH: 0, Tier.LOW: 1, None: 2}


def _row_sort_key(key: tuple) -> tuple:
    judge_model, generator_model, category, tier, label = key
    return (judge_model, generator_model, category, _TIER_ORDER[tier], label.value)


def _accuracy(
    n: int, n_correct: int, n_invalid: int, policy: InvalidPolicy
) -> Fraction | None:
    denominator = n if policy is InvalidPolicy.COUNT_WRONG else n - n_invalid
    if denominator == 0:
        return None
    return Fraction(n_correct, denominator)


# -- report emission -------------------------------------------------------


class ReportLayout(str, Enum):
    SUMMARY = "summary"
    CATEGORIES = "categories"


def format_percent(value: Fraction | None) -> str:
    """Exact rational to a 2-decimal percentage string; None renders as NA."""
    if value is None:
        return "NA"
    percent = Decimal(value.numerator) * 100 / Decimal(value.denominator)
    return str(percent.quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


def emit_report(report: DetectionReport, layout: ReportLayout) -> str:
    """Render a report as CSV text (UTF-8, comma-separated, LF lines).

    The summary layout is one row per judge with a high/low column pair per
    generator plus a closing real-facts column. The categories layout is one
    row per (category, judge, generator, tier) over fake-label records only.
    Undefined cells render as NA; an empty report is just the header.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if layout is ReportLayout.SUMMARY:
        generators = report.generators()
        header = ["judge_model"]
        for generator in generators:
            header.append(f"{generator}/high")
            header.append(f"{generator}/low")
        header.append("real_facts")
        writer.writerow(header)
        for judge in report.judges():
            cells = [judge]
            for generator in generators:
                for tier in (Tier.HIGH, Tier.LOW):
                    _, _, _, accuracy = report.aggregate(
                        judge_model=judge,
                        generator_model=generator,
                        tier=tier,
                        label=Label.FAKE,
                    )
                    cells.append(format_percent(accuracy))
            _, _, _, accuracy = report.aggregate(judge_model=judge, label=Label.REAL)
            cells.append(format_percent(accuracy))
            writer.writerow(cells)
    elif layout is ReportLayout.CATEGORIES:
        writer.writerow(["category", "judge_model", "generator_model", "tier", "accuracy"])
        fake_rows = [row for row in report.rows if row.label is Label.FAKE]
        for row in sorted(
            fake_rows,
            key=lambda r: (r.category, r.judge_model, r.generator_model, _TIER_ORDER[r.tier]),
        ):
            writer.writerow(
                [
                    row.category,
                    row.judge_model,
                    row.generator_model,
                    row.tier.value if row.tier is not None else "",
                    format_percent(row.accuracy),
                ]
            )
    else:
        raise ValueError(f"unknown report layout: {layout}")
    return buffer.getvalue()


# -- JSON-lines round-trips ------------------------------------------------


def record_row(record: FactRecord) -> dict:
    return {
        "id": record.id,
        "subject": record.subject,
        "predicate": record.predicate,
        "object_real": record.object_real,
        "object_used": record.object_used,
        "label": record.label.value,
        "tier": record.tier.value if record.tier is not None else None,
        "score_num": record.score.numerator if record.score is not None else None,
        "score_den": record.score.denominator if record.score is not None else None,
        "category": record.category,
        "statement": record.statement,
        "generator_model": record.generator_model,
    }


def write_records(path: Path | str, records: Iterable[FactRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(record_row(record), ensure_ascii=False))
            handle.write("\n")


def read_records(path: Path | str) -> list[FactRecord]:
    records = []
    for line_number, row in _jsonl_rows(path, RECORD_FIELDS, "record"):
        score = None
        if row["score_num"] is not None:
            try:
                score = Fraction(row["score_num"], row["score_den"])
            except (TypeError, ZeroDivisionError) as exc:
                raise ParseError(
                    f"bad score: {exc}", line_number=line_number
                ) from exc
        try:
            records.append(
                FactRecord(
                    id=row["id"],
                    subject=row["subject"],
                    predicate=row["predicate"],
                    object_real=row["object_real"],
                    object_used=row["object_used"],
                    label=Label(row["label"]),
                    tier=Tier(row["tier"]) if row["tier"] is not None else None,
                    score=score,
                    category=row["category"],
                    statement=row["statement"],
                    generator_model=row["generator_model"],
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), line_number=line_number) from exc
    return records


def write_verdicts(path: Path | str, verdicts: Iterable[Verdict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for verdict in verdicts:
            row = {
                "record_id": verdict.record_id,
                "judge_model": verdict.judge_model,
                "raw_output": verdict.raw_output,
                "parsed": verdict.parsed.value,
            }
            handle.write(json.dumps(row, ensure_ascii=False))
            handle.write("\n")


def read_verdicts(path: Path | str) -> list[Verdict]:
    verdicts = []
    for line_number, row in _jsonl_rows(path, VERDICT_FIELDS, "verdict"):
        try:
            parsed = Judgment(row["parsed"])
        except ValueError as exc:
            raise ParseError(
                f"bad parsed value {row['parsed']!r}", line_number=line_number
            ) from exc
        verdicts.append(
            Verdict(
                record_id=row["record_id"],
                judge_model=row["judge_model"],
                raw_output=row["raw_output"],
                parsed=parsed,
            )
        )
    return verdicts


def _jsonl_rows(path: Path | str, fields: tuple[str, ...], kind: str):
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
            if not isinstance(row, dict):
                raise ParseError(
                    f"{kind} row must be a JSON object", line_number=line_number
                )
            missing = [f for f in fields if f not in row]
            if missing:
                raise ParseError(
                    f"{kind} row missing fields: {', '.join(missing)}",
                    line_number=line_number,
                )
            yield line_number, row
