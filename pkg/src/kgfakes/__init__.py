"""Mine plausibly-false knowledge-graph triples, write statements for them
with an LLM, and score judge models on telling real from fake."""

from .errors import KgfakesError
from .gateway import (
    CompletionFailure,
    CompletionRequest,
    CompletionResult,
    EndpointConfig,
    complete,
    complete_batch,
)
from .harness import (
    DetectionReport,
    FactRecord,
    InvalidPolicy,
    Judgment,
    Label,
    ReportLayout,
    Verdict,
    assemble_records,
    emit_report,
    evaluate,
    parse_verdict,
)
from .kg import (
    DEFAULT_DENYLIST,
    KnowledgeGraph,
    Triple,
    category_of,
    load_descriptions,
    parse_triples,
)
from .miner import (
    ExtremePair,
    FakeCandidate,
    MineResult,
    Tier,
    candidate_objects,
    jaccard,
    mine,
    plausibility_score,
    rank_candidates,
    select_extremes,
)
from .prompts import PromptText, build_detection_prompt, build_generation_prompt

__version__ = "0.1.0"

__all__ = [
    "CompletionFailure",
    "CompletionRequest",
    "CompletionResult",
    "DEFAULT_DENYLIST",
    "DetectionReport",
    "EndpointConfig",
    "ExtremePair",
    "FactRecord",
    "FakeCandidate",
    "InvalidPolicy",
    "Judgment",
    "KgfakesError",
    "KnowledgeGraph",
    "Label",
    "MineResult",
    "PromptText",
    "ReportLayout",
    "Tier",
    "Triple",
    "Verdict",
    "assemble_records",
    "build_detection_prompt",
    "build_generation_prompt",
    "candidate_objects",
    "category_of",
    "complete",
    "complete_batch",
    "emit_report",
    "evaluate",
    "jaccard",
    "load_descriptions",
    "mine",
    "parse_triples",
    "parse_verdict",
    "plausibility_score",
    "rank_candidates",
    "select_extremes",
]
