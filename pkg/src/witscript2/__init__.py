"""Conversational joke generation.

Builds a three-part joke (topic, angle, punch line) from one input sentence
via a five-stage pipeline over pluggable text-completion backends, and ships
the evaluation harness for the accompanying 52-pair rating study.
"""

from .backend import (
    Backend,
    BackendConfig,
    CompletionRequest,
    LiveBackend,
    MatchMode,
    ScriptEntry,
    ScriptedBackend,
    load_script,
)
from .domain import (
    AssociationList,
    JokeResponse,
    PunchLine,
    Stage,
    StageRecord,
    Topic,
    TopicHandles,
    ends_with_punchline,
    handle_occurs_in_topic,
    normalize_for_match,
)
from .evaluation import (
    ResponsePair,
    RatingRecord,
    Source,
    SystemStats,
    bundled_corpus,
    mean_rating,
    pct_jokes,
    presentation_order,
    system_stats,
    table2_from_means,
)
from .pipeline import (
    FilterPolicy,
    PipelineConfig,
    filter_joke,
    generate_joke,
    run_batch,
    validate_topic,
)
from .prompts import PromptSet, PromptStage, PromptTemplate, default_prompt_set, load_prompt_set
from .service import create_app

__version__ = "0.1.0"

__all__ = [
    "AssociationList",
    "Backend",
    "BackendConfig",
    "CompletionRequest",
    "FilterPolicy",
    "JokeResponse",
    "LiveBackend",
    "MatchMode",
    "PipelineConfig",
    "PromptSet",
    "PromptStage",
    "PromptTemplate",
    "PunchLine",
    "RatingRecord",
    "ResponsePair",
    "ScriptEntry",
    "ScriptedBackend",
    "Source",
    "Stage",
    "StageRecord",
    "SystemStats",
    "Topic",
    "TopicHandles",
    "bundled_corpus",
    "create_app",
    "default_prompt_set",
    "ends_with_punchline",
    "filter_joke",
    "generate_joke",
    "handle_occurs_in_topic",
    "load_prompt_set",
    "load_script",
    "mean_rating",
    "normalize_for_match",
    "pct_jokes",
    "presentation_order",
    "run_batch",
    "system_stats",
    "table2_from_means",
    "validate_topic",
    "__version__",
]
