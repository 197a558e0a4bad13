"""The five-step joke-writing pipeline.

Orchestrates topic validation, handle selection, association generation
(once per handle), punch-line creation, and angle generation, parsing and
validating each completion and re-prompting malformed ones up to a retry
budget. Assembles the finished joke with a full stage trace and optionally
applies a fitness filter to the candidate.
"""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

from .backend import (
    Backend,
    BackendError,
    CompletionRequest,
    DecodingParams,
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    EmptyCompletion,
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
from .prompts import PromptSet, PromptStage, default_prompt_set

MAX_ASSOCIATIONS = 10

#: Heuristic filter weights: punch line intact / length in bounds / novelty.
FILTER_WEIGHTS = (4, 3, 3)
FILTER_ACCEPT_THRESHOLD = 0.5
FILTER_LENGTH_BOUNDS = (4, 60)
MODEL_JUDGE_ACCEPT_RATING = 3

_LIST_ITEM_RE = re.compile(r"^(?:\d+[.)]\s*|-\s+)(.*)$")
_PUNCHLINE_RE = re.compile(
    r"A:\s*(?P<a>.+?)\s*\|\s*B:\s*(?P<b>.+?)\s*\|\s*PUNCHLINE:\s*(?P<text>.+)",
    re.IGNORECASE,
)
_RATING_RE = re.compile(r"\b([1-4])\b")


class FilterPolicy(str, Enum):
    OFF = "off"
    HEURISTIC = "heuristic"
    MODEL_JUDGED = "model"


class PipelineError(Exception):
    """Base class for pipeline failures."""

    code = "PipelineError"


class StageError(PipelineError):
    """A stage failed; carries the stage at which it happened."""

    code = "StageError"

    def __init__(self, stage: Stage, message: str):
        super().__init__(f"{stage.value}: {message}")
        self.stage = stage


class StageParseError(StageError):
    code = "StageParseError"


class HandleNotInTopic(StageError):
    code = "HandleNotInTopic"


class ChosenNotInList(StageError):
    code = "ChosenNotInList"


class PunchlineDropped(StageError):
    code = "PunchlineDropped"


class BackendStageError(StageError):
    """A backend error wrapped with the stage it interrupted."""

    def __init__(self, stage: Stage, cause: BackendError):
        super().__init__(stage, str(cause))
        self.cause = cause

    @property
    def code(self) -> str:  # type: ignore[override]
        return self.cause.code


class JokeRejected(PipelineError):
    """The filter scored the candidate below threshold; carries the candidate."""

    code = "JokeRejected"
    stage = Stage.FILTER

    def __init__(self, candidate: JokeResponse, score: float):
        super().__init__(f"joke rejected by filter with score {score:.2f}")
        self.candidate = candidate
        self.score = score


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs of a pipeline run; defaults keep baseline behavior."""

    associations_per_handle: int = 5
    retries_per_stage: int = 2
    strict_punchline: bool = False
    filter_policy: FilterPolicy = FilterPolicy.OFF
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    stage_decoding: Mapping[PromptStage, DecodingParams] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 1 <= self.associations_per_handle <= MAX_ASSOCIATIONS:
            raise ValueError(
                f"associations_per_handle must be in [1, {MAX_ASSOCIATIONS}]"
            )
        if self.retries_per_stage < 0:
            raise ValueError("retries_per_stage must be >= 0")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def request_for(self, stage: PromptStage, prompt: str) -> CompletionRequest:
        override = self.stage_decoding.get(stage)
        temperature = self.temperature
        max_tokens = self.max_tokens
        stops: tuple[str, ...] = ()
        if override is not None:
            if override.temperature is not None:
                temperature = override.temperature
            if override.max_tokens is not None:
                max_tokens = override.max_tokens
            if override.stop_sequences is not None:
                stops = override.stop_sequences
        return CompletionRequest(
            prompt=prompt,
            max_tokens=max_tokens,
            temperature=temperature,
            stop_sequences=stops,
        )


@dataclass(frozen=True)
class FilterDecision:
    accept: bool
    score: float
    record: StageRecord | None = None


class _Retryable(Exception):
    """Internal: a malformed completion worth re-prompting for.

    Carries the terminal error class so the stage runner can raise the
    right thing once the retry budget runs out.
    """

    def __init__(self, error_cls: type[StageError], message: str):
        super().__init__(message)
        self.error_cls = error_cls


def validate_topic(text: str) -> Topic:
    """Turn raw user input into a Topic or raise a specific validation error."""
    return Topic(text)


def parse_numbered_list(raw: str) -> list[str]:
    """Extract items from numbered ("1. x", "2) y"), dashed, or bare lines.

    Does not deduplicate; callers decide what is usable.
    """
    items = []
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        match = _LIST_ITEM_RE.match(line)
        item = (match.group(1) if match else line).strip()
        if item:
            items.append(item)
    return items


def _run_stage(
    stage: Stage,
    prompt_stage: PromptStage,
    bindings: Mapping[str, str],
    parse: Callable[[str], tuple],
    backend: Backend,
    prompt_set: PromptSet,
    config: PipelineConfig,
):
    """Prompt, parse, and validate one stage, retrying malformed completions.

    Returns ``(value, StageRecord)``. Hard backend errors abort immediately,
    wrapped with the stage identity; empty completions and parse rejections
    are retried up to the configured budget.
    """
    prompt = prompt_set.get(prompt_stage).render(dict(bindings))
    request = config.request_for(prompt_stage, prompt)
    started = time.perf_counter()
    attempts = 0
    last: _Retryable | EmptyCompletion | None = None
    while attempts < 1 + config.retries_per_stage:
        attempts += 1
        try:
            raw = backend.complete(request)
        except EmptyCompletion as exc:
            last = exc
            continue
        except BackendError as exc:
            raise BackendStageError(stage, exc) from exc
        try:
            value, summary = parse(raw)
        except _Retryable as exc:
            last = exc
            continue
        record = StageRecord(
            stage=stage,
            prompt_text=prompt,
            raw_completion=raw,
            parsed_summary=summary,
            attempts=attempts,
            elapsed=time.perf_counter() - started,
        )
        return value, record
    if isinstance(last, EmptyCompletion):
        raise BackendStageError(stage, last) from last
    assert last is not None
    raise last.error_cls(stage, f"{last} (after {attempts} attempts)")


def select_handles(
    topic: Topic,
    backend: Backend,
    prompt_set: PromptSet,
    config: PipelineConfig,
) -> tuple[TopicHandles, StageRecord]:
    """Pick the two most attention-getting phrases; both must occur in the topic."""

    def parse(raw: str) -> tuple[TopicHandles, str]:
        items = parse_numbered_list(raw)
        if len(items) < 2:
            raise _Retryable(
                StageParseError, f"expected two handles, parsed {len(items)}"
            )
        first, second = items[0], items[1]
        if normalize_for_match(first) == normalize_for_match(second):
            raise _Retryable(StageParseError, f"handles are not distinct: {first!r}")
        for handle in (first, second):
            if not handle_occurs_in_topic(handle, topic.text):
                raise _Retryable(
                    HandleNotInTopic, f"handle {handle!r} does not occur in the topic"
                )
        return TopicHandles(first, second), f"{first} | {second}"

    return _run_stage(
        Stage.HANDLE_SELECTION,
        PromptStage.HANDLE_SELECTION,
        {"topic": topic.text},
        parse,
        backend,
        prompt_set,
        config,
    )


def generate_associations(
    handle: str,
    topic: Topic,
    backend: Backend,
    prompt_set: PromptSet,
    config: PipelineConfig,
    trace_stage: Stage = Stage.ASSOCIATIONS_A,
) -> tuple[AssociationList, StageRecord]:
    """One backend call producing up to K distinct associations for a handle."""
    handle_norm = normalize_for_match(handle)

    def parse(raw: str) -> tuple[AssociationList, str]:
        items: list[str] = []
        seen: set[str] = set()
        for item in parse_numbered_list(raw):
            norm = normalize_for_match(item)
            if not norm or norm == handle_norm or norm in seen:
                continue
            seen.add(norm)
            items.append(item)
            if len(items) == config.associations_per_handle:
                break
        if not items:
            raise _Retryable(
                StageParseError, f"no usable associations for {handle!r}"
            )
        return AssociationList(handle, tuple(items)), "; ".join(items)

    return _run_stage(
        trace_stage,
        PromptStage.ASSOCIATIONS,
        {"handle": handle, "topic": topic.text},
        parse,
        backend,
        prompt_set,
        config,
    )


def _format_numbered(items: Sequence[str]) -> str:
    return "\n".join(f"{i}. {item}" for i, item in enumerate(items, start=1))


def create_punchline(
    list_a: AssociationList,
    list_b: AssociationList,
    backend: Backend,
    prompt_set: PromptSet,
    config: PipelineConfig,
) -> tuple[PunchLine, StageRecord]:
    """Combine one association from each list into a punch line.

    The completion must follow the imposed
    ``A: <item> | B: <item> | PUNCHLINE: <text>`` form and choose real
    members of both lists.
    """
    norms_a = {normalize_for_match(i) for i in list_a.items}
    norms_b = {normalize_for_match(i) for i in list_b.items}

    def parse(raw: str) -> tuple[PunchLine, str]:
        match = _PUNCHLINE_RE.search(raw)
        if not match:
            raise _Retryable(
                StageParseError, "completion does not match the A | B | PUNCHLINE form"
            )
        chosen_a = match.group("a").strip()
        chosen_b = match.group("b").strip()
        text = match.group("text").strip().splitlines()[0].strip()
        if not text:
            raise _Retryable(StageParseError, "empty punch line text")
        if normalize_for_match(chosen_a) not in norms_a:
            raise _Retryable(
                ChosenNotInList, f"{chosen_a!r} is not in the first association list"
            )
        if normalize_for_match(chosen_b) not in norms_b:
            raise _Retryable(
                ChosenNotInList, f"{chosen_b!r} is not in the second association list"
            )
        punchline = PunchLine(text=text, chosen_a=chosen_a, chosen_b=chosen_b)
        return punchline, f"{text} (a={chosen_a}, b={chosen_b})"

    return _run_stage(
        Stage.PUNCHLINE_CREATION,
        PromptStage.PUNCHLINE_CREATION,
        {
            "assoc_list_a": _format_numbered(list_a.items),
            "assoc_list_b": _format_numbered(list_b.items),
        },
        parse,
        backend,
        prompt_set,
        config,
    )


def generate_angle(
    topic: Topic,
    punchline: PunchLine,
    backend: Backend,
    prompt_set: PromptSet,
    config: PipelineConfig,
) -> tuple[tuple[str, bool], StageRecord]:
    """Generate the joke text that should end with the punch line.

    In lenient mode (the default) a completion that drops or rewrites the
    punch line is accepted with ``punchline_intact`` False; in strict mode
    it is retried and then rejected.
    """

    def parse(raw: str) -> tuple[tuple[str, bool], str]:
        text = raw.strip()
        if text.lower().startswith("joke:"):
            text = text[len("joke:"):].strip()
        if not text:
            raise _Retryable(StageParseError, "completion held no joke text")
        intact = ends_with_punchline(text, punchline.text)
        if config.strict_punchline and not intact:
            raise _Retryable(
                PunchlineDropped,
                f"joke does not end with the punch line {punchline.text!r}",
            )
        return (text, intact), f"intact={intact}"

    return _run_stage(
        Stage.ANGLE_GENERATION,
        PromptStage.ANGLE_GENERATION,
        {"topic": topic.text, "punchline": punchline.text},
        parse,
        backend,
        prompt_set,
        config,
    )


def filter_joke(
    candidate: JokeResponse,
    config: PipelineConfig,
    backend: Backend | None = None,
    prompt_set: PromptSet | None = None,
) -> FilterDecision:
    """Score a finished candidate and decide whether to keep it.

    Off always accepts. Heuristic scores intactness, length-in-bounds, and
    novelty with fixed weights. ModelJudged spends one extra backend call on
    a 1-4 rating and accepts 3 or better.
    """
    if config.filter_policy is FilterPolicy.OFF:
        return FilterDecision(accept=True, score=1.0)

    if config.filter_policy is FilterPolicy.HEURISTIC:
        intact = 1 if candidate.punchline_intact else 0
        token_count = len(candidate.joke_text.split())
        low, high = FILTER_LENGTH_BOUNDS
        in_bounds = 1 if low <= token_count <= high else 0
        joke_norm = normalize_for_match(candidate.joke_text)
        novel = (
            1
            if joke_norm != normalize_for_match(candidate.topic.text)
            and joke_norm != normalize_for_match(candidate.punchline.text)
            else 0
        )
        w_intact, w_length, w_novel = FILTER_WEIGHTS
        score = (w_intact * intact + w_length * in_bounds + w_novel * novel) / 10
        return FilterDecision(accept=score >= FILTER_ACCEPT_THRESHOLD, score=score)

    if backend is None or prompt_set is None:
        raise ValueError("model-judged filtering needs a backend and prompt set")

    def parse(raw: str) -> tuple[int, str]:
        match = _RATING_RE.search(raw)
        if not match:
            raise _Retryable(StageParseError, "no 1-4 rating in completion")
        rating = int(match.group(1))
        return rating, f"rating={rating}"

    rating, record = _run_stage(
        Stage.FILTER,
        PromptStage.FILTER,
        {"topic": candidate.topic.text, "joke": candidate.joke_text},
        parse,
        backend,
        prompt_set,
        config,
    )
    return FilterDecision(
        accept=rating >= MODEL_JUDGE_ACCEPT_RATING,
        score=(rating - 1) / 3,
        record=record,
    )


def generate_joke(
    text: str,
    backend: Backend,
    prompt_set: PromptSet | None = None,
    config: PipelineConfig | None = None,
) -> JokeResponse:
    """Run the whole pipeline on one input sentence.

    Happy path with the filter off issues exactly five backend calls:
    handle selection, two association lists, punch line, angle. A filter
    rejection raises JokeRejected carrying the full candidate.
    """
    prompt_set = prompt_set or default_prompt_set()
    config = config or PipelineConfig()

    topic = validate_topic(text)
    handles, handles_record = select_handles(topic, backend, prompt_set, config)
    list_a, assoc_a_record = generate_associations(
        handles.first, topic, backend, prompt_set, config,
        trace_stage=Stage.ASSOCIATIONS_A,
    )
    list_b, assoc_b_record = generate_associations(
        handles.second, topic, backend, prompt_set, config,
        trace_stage=Stage.ASSOCIATIONS_B,
    )
    punchline, punchline_record = create_punchline(
        list_a, list_b, backend, prompt_set, config
    )
    (joke_text, intact), angle_record = generate_angle(
        topic, punchline, backend, prompt_set, config
    )
    candidate = JokeResponse(
        topic=topic,
        handles=handles,
        associations=(list_a, list_b),
        punchline=punchline,
        joke_text=joke_text,
        punchline_intact=intact,
        trace=(
            handles_record,
            assoc_a_record,
            assoc_b_record,
            punchline_record,
            angle_record,
        ),
    )
    if config.filter_policy is not FilterPolicy.OFF:
        decision = filter_joke(candidate, config, backend, prompt_set)
        if decision.record is not None:
            candidate = replace(candidate, trace=(*candidate.trace, decision.record))
        if not decision.accept:
            raise JokeRejected(candidate, decision.score)
    return candidate


@dataclass(frozen=True)
class BatchItem:
    """Outcome of one batch line: a response or the error that stopped it."""

    index: int
    input_text: str
    response: JokeResponse | None = None
    error: Exception | None = None

    @property
    def ok(self) -> bool:
        return self.response is not None


def run_batch(
    topics: Sequence[str],
    backend: Backend,
    prompt_set: PromptSet | None = None,
    config: PipelineConfig | None = None,
    parallel: int = 1,
) -> list[BatchItem]:
    """Generate jokes for many topics; results come back in input order.

    ``parallel`` bounds the worker pool. Per-topic failures are captured in
    the corresponding item instead of aborting the run.
    """

    def run_one(pair: tuple[int, str]) -> BatchItem:
        index, text = pair
        try:
            response = generate_joke(text, backend, prompt_set, config)
        except Exception as exc:
            return BatchItem(index=index, input_text=text, error=exc)
        return BatchItem(index=index, input_text=text, response=response)

    if parallel <= 1:
        return [run_one(pair) for pair in enumerate(topics)]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(run_one, enumerate(topics)))
