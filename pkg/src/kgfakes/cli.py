"""Command-line pipeline: ingest, mine, generate, judge, report.

Each stage reads and writes files under one output directory, so stages can
be re-run or swapped out individually. Every artifact records the rng seed
and a hash of the semantic configuration (never filesystem paths), which
keeps repeated runs byte-comparable wherever they live on disk.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Sequence

from .errors import ConfigError, KgfakesError, NotAFactError
from .gateway import CompletionFailure, CompletionRequest, EndpointConfig, complete_batch
from .harness import (
    InvalidPolicy,
    ReportLayout,
    Verdict,
    assemble_records,
    emit_report,
    evaluate,
    parse_verdict,
    read_records,
    read_verdicts,
    write_records,
    write_verdicts,
)
from .kg import (
    DEFAULT_DENYLIST,
    KnowledgeGraph,
    Triple,
    iter_triple_rows,
    load_descriptions,
    parse_triples,
)
from .miner import (
    mine,
    read_candidates,
    sample_seeds,
    sorted_seeds,
    write_candidates,
    write_skips,
)
from .prompts import build_detection_prompt

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
CANDIDATES = "candidates.jsonl"
MINE_SKIPS = "mine_skips.jsonl"
RECORDS = "records.jsonl"
GENERATE_SKIPS = "generate_skips.jsonl"
VERDICTS = "verdicts.jsonl"
JUDGE_SKIPS = "judge_skips.jsonl"
SUMMARY_CSV = "report_summary.csv"
CATEGORIES_CSV = "report_categories.csv"
SUMMARY_FIGURE = "summary.png"

DEFAULTS: dict = {
    "kg_path": None,
    "descriptions_path": None,
    "out_dir": "out",
    "denylist": sorted(DEFAULT_DENYLIST),
    "min_category_count": 0,
    "rng_seed": 0,
    "strict_exclusion": False,
    "top_k": None,
    "seeds_path": None,
    "sample_per_category": None,
    "real_seeds_path": None,
    "real_per_category": None,
    "invalid_policy": "exclude",
    "parallelism": 4,
    "generator_url": None,
    "generator_mock": None,
    "generator_model": "generator",
    "gen_temperature": 0.7,
    "gen_max_tokens": 256,
    "judge_url": None,
    "judge_mock": None,
    "judge_models": ["judge"],
    "judge_temperature": 0.0,
    "judge_max_tokens": 16,
    "jury": False,
    "figures": True,
    "timeout": 60.0,
    "max_attempts": 5,
    "backoff_base": 1.0,
}

# The hash covers knobs that shape artifact content. Paths and transport
# settings stay out so identical configurations hash alike anywhere.
HASH_FIELDS = (
    "denylist",
    "min_category_count",
    "rng_seed",
    "strict_exclusion",
    "top_k",
    "sample_per_category",
    "real_per_category",
    "invalid_policy",
    "generator_model",
    "gen_temperature",
    "gen_max_tokens",
    "judge_models",
    "judge_temperature",
    "judge_max_tokens",
    "jury",
)


@dataclass(frozen=True)
class RunConfig:
    kg_path: Path | None
    descriptions_path: Path | None
    out_dir: Path
    denylist: tuple[str, ...]
    min_category_count: int
    rng_seed: int
    strict_exclusion: bool
    top_k: int | None
    seeds_path: Path | None
    sample_per_category: int | None
    real_seeds_path: Path | None
    real_per_category: int | None
    invalid_policy: str
    parallelism: int
    generator_url: str | None
    generator_mock: Path | None
    generator_model: str
    gen_temperature: float
    gen_max_tokens: int
    judge_url: str | None
    judge_mock: Path | None
    judge_models: tuple[str, ...]
    judge_temperature: float
    judge_max_tokens: int
    jury: bool
    figures: bool
    timeout: float
    max_attempts: int
    backoff_base: float

    def config_hash(self) -> str:
        payload = {}
        for field in HASH_FIELDS:
            value = getattr(self, field)
            if isinstance(value, tuple):
                value = list(value)
            payload[field] = value
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Layer defaults, config-file values, and explicit flags, in that order."""
    merged = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as handle:
            try:
                file_values = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {config_path}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {config_path} must hold a JSON object")
        unknown = sorted(set(file_values) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged.update(file_values)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value

    denylist = merged["denylist"]
    if isinstance(denylist, str):
        denylist = [part.strip() for part in denylist.split(",") if part.strip()]
    judge_models = merged["judge_models"]
    if isinstance(judge_models, str):
        judge_models = [judge_models]
    if not judge_models:
        raise ConfigError("at least one judge model is required")

    if merged["seeds_path"] is not None and merged["sample_per_category"] is not None:
        raise ConfigError("--seeds and --sample-per-category are mutually exclusive")
    if merged["real_seeds_path"] is not None and merged["real_per_category"] is not None:
        raise ConfigError("--real-seeds and --real-per-category are mutually exclusive")

    def as_path(value) -> Path | None:
        return None if value is None else Path(value)

    return RunConfig(
        kg_path=as_path(merged["kg_path"]),
        descriptions_path=as_path(merged["descriptions_path"]),
        out_dir=Path(merged["out_dir"]),
        denylist=tuple(sorted(set(denylist))),
        min_category_count=int(merged["min_category_count"]),
        rng_seed=int(merged["rng_seed"]),
        strict_exclusion=bool(merged["strict_exclusion"]),
        top_k=None if merged["top_k"] is None else int(merged["top_k"]),
        seeds_path=as_path(merged["seeds_path"]),
        sample_per_category=(
            None
            if merged["sample_per_category"] is None
            else int(merged["sample_per_category"])
        ),
        real_seeds_path=as_path(merged["real_seeds_path"]),
        real_per_category=(
            None
            if merged["real_per_category"] is None
            else int(merged["real_per_category"])
        ),
        invalid_policy=str(merged["invalid_policy"]),
        parallelism=int(merged["parallelism"]),
        generator_url=merged["generator_url"],
        generator_mock=as_path(merged["generator_mock"]),
        generator_model=str(merged["generator_model"]),
        gen_temperature=float(merged["gen_temperature"]),
        gen_max_tokens=int(merged["gen_max_tokens"]),
        judge_url=merged["judge_url"],
        judge_mock=as_path(merged["judge_mock"]),
        judge_models=tuple(judge_models),
        judge_temperature=float(merged["judge_temperature"]),
        judge_max_tokens=int(merged["judge_max_tokens"]),
        jury=bool(merged["jury"]),
        figures=bool(merged["figures"]),
        timeout=float(merged["timeout"]),
        max_attempts=int(merged["max_attempts"]),
        backoff_base=float(merged["backoff_base"]),
    )


# -- commands --------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    kg = _load_graph(cfg)
    counts = kg.category_counts()
    print(f"triples: {len(kg)}")
    print(f"entities: {kg.entity_count}")
    print(f"relations: {kg.relation_count}")
    print(f"duplicates dropped: {kg.stats.duplicates_dropped}")
    print(f"denylist dropped: {kg.stats.denylist_dropped}")
    print(f"min-count dropped: {kg.stats.min_count_dropped}")
    if kg.description_stats is not None:
        print(
            f"descriptions attached: {kg.description_stats.attached}"
            f" (unknown entities skipped: {kg.description_stats.unknown_skipped})"
        )
    print("categories:")
    for category, count in counts.items():
        print(f"  {category}: {count}")

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "stage": "ingest",
        "config_hash": cfg.config_hash(),
        "rng_seed": cfg.rng_seed,
        "triples": len(kg),
        "entities": kg.entity_count,
        "relations": kg.relation_count,
        "duplicates_dropped": kg.stats.duplicates_dropped,
        "denylist_dropped": kg.stats.denylist_dropped,
        "min_count_dropped": kg.stats.min_count_dropped,
        "categories": counts,
    }
    path = cfg.out_dir / MANIFEST
    _write_json(path, manifest)
    print(f"wrote {path}")
    return 0


def cmd_mine(cfg: RunConfig) -> int:
    kg = _load_graph(cfg)
    seeds = _select_seeds(cfg, kg)
    result = mine(kg, seeds, top_k=cfg.top_k, strict=cfg.strict_exclusion)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    candidates_path = cfg.out_dir / CANDIDATES
    skips_path = cfg.out_dir / MINE_SKIPS
    write_candidates(candidates_path, kg, result.candidates)
    write_skips(skips_path, kg, result.skipped)
    _write_meta(cfg, candidates_path, "mine")
    _write_meta(cfg, skips_path, "mine")
    print(f"seeds: {len(seeds)}")
    print(f"candidates: {len(result.candidates)}")
    print(f"skipped seeds: {len(result.skipped)}")
    print(f"wrote {candidates_path}")
    return 0


def cmd_generate(cfg: RunConfig) -> int:
    kg = _load_graph(cfg)
    candidates_path = cfg.out_dir / CANDIDATES
    if not candidates_path.exists():
        raise ConfigError(f"no candidate file at {candidates_path}; run mine first")
    candidates = read_candidates(candidates_path, kg)
    real_seeds = _select_real_seeds(cfg, kg)
    endpoint = _endpoint(cfg, "generator", cfg.generator_url, cfg.generator_mock)
    result = assemble_records(
        candidates,
        real_seeds,
        kg,
        endpoint,
        generator_model=cfg.generator_model,
        temperature=cfg.gen_temperature,
        max_tokens=cfg.gen_max_tokens,
        parallelism=cfg.parallelism,
    )

    records_path = cfg.out_dir / RECORDS
    skips_path = cfg.out_dir / GENERATE_SKIPS
    write_records(records_path, result.records)
    _write_skip_rows(
        skips_path,
        (
            {
                "subject": skip.subject,
                "predicate": skip.predicate,
                "object_used": skip.object_used,
                "tier": skip.tier,
                "reason": skip.reason,
            }
            for skip in result.skipped
        ),
    )
    _write_meta(cfg, records_path, "generate")
    _write_meta(cfg, skips_path, "generate")
    print(f"records: {len(result.records)} (fake candidates: {len(candidates)},"
          f" real seeds: {len(real_seeds)})")
    print(f"skipped: {len(result.skipped)}")
    print(f"wrote {records_path}")
    return 0


def cmd_judge(cfg: RunConfig) -> int:
    records_path = cfg.out_dir / RECORDS
    if not records_path.exists():
        raise ConfigError(f"no record file at {records_path}; run generate first")
    records = read_records(records_path)
    endpoint = _endpoint(cfg, "judge", cfg.judge_url, cfg.judge_mock)

    verdicts: list[Verdict] = []
    skip_rows: list[dict] = []
    for judge_model in cfg.judge_models:
        requests = [
            CompletionRequest(
                prompt=build_detection_prompt(record.statement),
                model_name=judge_model,
                temperature=cfg.judge_temperature,
                max_tokens=cfg.judge_max_tokens,
                request_id=f"{record.id}:{judge_model}",
            )
            for record in records
        ]
        outcomes = complete_batch(requests, endpoint, cfg.parallelism)
        for record, outcome in zip(records, outcomes):
            if isinstance(outcome, CompletionFailure):
                skip_rows.append(
                    {
                        "record_id": record.id,
                        "judge_model": judge_model,
                        "reason": f"{outcome.kind}: {outcome.message}",
                    }
                )
                continue
            verdicts.append(
                Verdict(
                    record_id=record.id,
                    judge_model=judge_model,
                    raw_output=outcome.raw_text,
                    parsed=parse_verdict(outcome.raw_text),
                )
            )

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    verdicts_path = cfg.out_dir / VERDICTS
    skips_path = cfg.out_dir / JUDGE_SKIPS
    write_verdicts(verdicts_path, verdicts)
    _write_skip_rows(skips_path, skip_rows)
    _write_meta(cfg, verdicts_path, "judge")
    _write_meta(cfg, skips_path, "judge")
    print(f"verdicts: {len(verdicts)} ({len(records)} records x"
          f" {len(cfg.judge_models)} judges, {len(skip_rows)} skipped)")
    print(f"wrote {verdicts_path}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    records_path = cfg.out_dir / RECORDS
    verdicts_path = cfg.out_dir / VERDICTS
    for path, stage in ((records_path, "generate"), (verdicts_path, "judge")):
        if not path.exists():
            raise ConfigError(f"no file at {path}; run {stage} first")
    records = read_records(records_path)
    verdicts = read_verdicts(verdicts_path)
    try:
        policy = InvalidPolicy(cfg.invalid_policy)
    except ValueError as exc:
        raise ConfigError(
            f"invalid_policy must be one of"
            f" {', '.join(p.value for p in InvalidPolicy)}"
        ) from exc
    report = evaluate(records, verdicts, policy, jury=cfg.jury)

    comment = (
        f"# config_hash={cfg.config_hash()} rng_seed={cfg.rng_seed}"
        f" invalid_policy={policy.value}\n"
    )
    summary_path = cfg.out_dir / SUMMARY_CSV
    categories_path = cfg.out_dir / CATEGORIES_CSV
    _write_text(summary_path, comment + emit_report(report, ReportLayout.SUMMARY))
    _write_text(categories_path, comment + emit_report(report, ReportLayout.CATEGORIES))
    print(f"wrote {summary_path}")
    print(f"wrote {categories_path}")

    if cfg.figures:
        from .figures import save_category_figure, save_summary_figure

        summary_figure = cfg.out_dir / SUMMARY_FIGURE
        if save_summary_figure(report, summary_figure):
            print(f"wrote {summary_figure}")
        for generator in report.generators():
            figure_path = cfg.out_dir / f"categories_{_slug(generator)}.png"
            if save_category_figure(report, generator, figure_path):
                print(f"wrote {figure_path}")
    return 0


# -- helpers ---------------------------------------------------------------


def _load_graph(cfg: RunConfig) -> KnowledgeGraph:
    if cfg.kg_path is None:
        raise ConfigError("--kg is required")
    if not cfg.kg_path.exists():
        raise ConfigError(f"triple dump not found: {cfg.kg_path}")
    with open(cfg.kg_path, "rb") as handle:
        kg = parse_triples(
            handle, cfg.denylist, min_category_count=cfg.min_category_count
        )
    if cfg.descriptions_path is not None:
        if not cfg.descriptions_path.exists():
            raise ConfigError(f"description file not found: {cfg.descriptions_path}")
        with open(cfg.descriptions_path, "rb") as handle:
            kg = load_descriptions(handle, kg)
    return kg


def _read_seed_file(path: Path, kg: KnowledgeGraph) -> list[Triple]:
    seeds = []
    with open(path, "rb") as handle:
        for line_number, row in iter_triple_rows(handle):
            triple = kg.resolve(*row)
            if triple is None or not kg.contains(triple):
                raise NotAFactError(
                    f"seed ({row[0]}, {row[1]}, {row[2]}) at line {line_number}"
                    " is not a fact in the graph"
                )
            seeds.append(triple)
    return seeds


def _select_seeds(cfg: RunConfig, kg: KnowledgeGraph) -> list[Triple]:
    if cfg.seeds_path is not None:
        if not cfg.seeds_path.exists():
            raise ConfigError(f"seed file not found: {cfg.seeds_path}")
        return _read_seed_file(cfg.seeds_path, kg)
    if cfg.sample_per_category is not None:
        rng = Random(f"{cfg.rng_seed}/fake-seeds")
        return sample_seeds(kg, cfg.sample_per_category, rng)
    return sorted_seeds(kg)


def _select_real_seeds(cfg: RunConfig, kg: KnowledgeGraph) -> list[Triple]:
    if cfg.real_seeds_path is not None:
        if not cfg.real_seeds_path.exists():
            raise ConfigError(f"real-seed file not found: {cfg.real_seeds_path}")
        return _read_seed_file(cfg.real_seeds_path, kg)
    if cfg.real_per_category is not None:
        rng = Random(f"{cfg.rng_seed}/real-seeds")
        return sample_seeds(kg, cfg.real_per_category, rng)
    return []


def _endpoint(
    cfg: RunConfig, role: str, url: str | None, mock: Path | None
) -> EndpointConfig:
    if url is None and mock is None:
        raise ConfigError(f"provide --{role}-endpoint or --{role}-mock")
    if url is not None and mock is not None:
        raise ConfigError(f"provide only one of --{role}-endpoint and --{role}-mock")
    if mock is not None and not mock.exists():
        raise ConfigError(f"mock response file not found: {mock}")
    return EndpointConfig(
        base_url=url,
        mock_path=mock,
        timeout=cfg.timeout,
        max_attempts=cfg.max_attempts,
        backoff_base=cfg.backoff_base,
    )


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(obj, handle, indent=2, ensure_ascii=False)
        handle.write("\n")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _write_skip_rows(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False))
            handle.write("\n")


def _write_meta(cfg: RunConfig, artifact_path: Path, stage: str) -> None:
    meta_path = artifact_path.parent / f"{artifact_path.name}.meta.json"
    _write_json(
        meta_path,
        {"stage": stage, "config_hash": cfg.config_hash(), "rng_seed": cfg.rng_seed},
    )


def _slug(name: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9._-]+", "-", name).strip("-")
    return cleaned or "model"


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, help="JSON file with defaults for any flag")
    parent.add_argument("--kg", dest="kg_path", type=Path,
                        help="triple dump, one subject<TAB>predicate<TAB>object per line")
    parent.add_argument("--descriptions", dest="descriptions_path", type=Path,
                        help="JSON-lines entity descriptions")
    parent.add_argument("--out", dest="out_dir", type=Path,
                        help="output directory shared by all stages (default: out)")
    parent.add_argument("--denylist",
                        help="comma-separated categories to drop at ingest;"
                             " pass '' to keep everything")
    parent.add_argument("--min-category-count", type=int, dest="min_category_count",
                        help="drop categories with fewer triples than this")
    parent.add_argument("--rng-seed", type=int, dest="rng_seed",
                        help="seed for all sampling (default: 0)")
    parent.add_argument("--strict-exclusion", action="store_const", const=True,
                        dest="strict_exclusion",
                        help="also exclude candidates sharing any triple with the seed subject")
    parent.add_argument("--top-k", type=int, dest="top_k",
                        help="emit up to k ranked candidates per seed instead of extremes")
    parent.add_argument("--seeds", dest="seeds_path", type=Path,
                        help="explicit seed triples (same TSV format as the dump)")
    parent.add_argument("--sample-per-category", type=int, dest="sample_per_category",
                        help="sample this many seeds per category")
    parent.add_argument("--real-seeds", dest="real_seeds_path", type=Path,
                        help="explicit real-fact seeds for generation")
    parent.add_argument("--real-per-category", type=int, dest="real_per_category",
                        help="sample this many real facts per category for generation")
    parent.add_argument("--invalid-policy", dest="invalid_policy",
                        choices=[p.value for p in InvalidPolicy],
                        help="how unparseable verdicts count (default: exclude)")
    parent.add_argument("--parallelism", type=int,
                        help="max requests in flight (default: 4)")
    parent.add_argument("--generator-endpoint", dest="generator_url",
                        help="base URL of the generation endpoint")
    parent.add_argument("--generator-mock", dest="generator_mock", type=Path,
                        help="canned generation responses (JSON, keyed by prompt fingerprint)")
    parent.add_argument("--generator-model", dest="generator_model",
                        help="model name sent with generation requests")
    parent.add_argument("--gen-temperature", type=float, dest="gen_temperature",
                        help="generation temperature (default: 0.7)")
    parent.add_argument("--gen-max-tokens", type=int, dest="gen_max_tokens",
                        help="generation token budget (default: 256)")
    parent.add_argument("--judge-endpoint", dest="judge_url",
                        help="base URL of the judging endpoint")
    parent.add_argument("--judge-mock", dest="judge_mock", type=Path,
                        help="canned judge responses (JSON, keyed by prompt fingerprint)")
    parent.add_argument("--judge-model", dest="judge_models", action="append",
                        help="judge model name; repeat for a panel of judges")
    parent.add_argument("--judge-temperature", type=float, dest="judge_temperature",
                        help="judging temperature (default: 0.0)")
    parent.add_argument("--judge-max-tokens", type=int, dest="judge_max_tokens",
                        help="judging token budget (default: 16)")
    parent.add_argument("--jury", action="store_const", const=True, dest="jury",
                        help="add a majority-vote row over all judges to the report")
    parent.add_argument("--no-figures", action="store_const", const=False,
                        dest="figures", help="skip figure rendering in the report stage")
    parent.add_argument("--timeout", type=float, help="per-request timeout in seconds")
    parent.add_argument("--max-attempts", type=int, dest="max_attempts",
                        help="attempts per request before giving up (default: 5)")
    parent.add_argument("--backoff-base", type=float, dest="backoff_base",
                        help="first retry delay in seconds (default: 1.0)")
    parent.add_argument("--log-level", dest="log_level", default="warning",
                        choices=["debug", "info", "warning", "error"],
                        help="stderr log verbosity")

    parser = argparse.ArgumentParser(
        prog="kgfakes",
        description="Mine plausibly-false triples from a knowledge graph, write"
                    " statements with an LLM, and score judges on detecting them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = (
        ("ingest", cmd_ingest, "parse the dump and report graph statistics"),
        ("mine", cmd_mine, "mine fake-object candidates for seed facts"),
        ("generate", cmd_generate, "write statements for candidates and real seeds"),
        ("judge", cmd_judge, "collect real-or-fake verdicts from judge models"),
        ("report", cmd_report, "tally verdicts into CSV reports and figures"),
    )
    for name, func, help_text in commands:
        command = sub.add_parser(name, parents=[parent], help=help_text)
        command.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return args.func(cfg)
    except KgfakesError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: path: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
