"""Core vocabulary for the joke pipeline.

Immutable value types for each construction artifact (topic, handles,
association lists, punch line, finished joke) plus the text-normalization
helpers every other module uses to compare them. No I/O here.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from enum import Enum

TOPIC_MAX_CHARS = 500
TOPIC_MIN_TOKENS = 3


class Stage(str, Enum):
    """Pipeline stages in canonical trace order."""

    HANDLE_SELECTION = "HandleSelection"
    ASSOCIATIONS_A = "AssociationsA"
    ASSOCIATIONS_B = "AssociationsB"
    PUNCHLINE_CREATION = "PunchlineCreation"
    ANGLE_GENERATION = "AngleGeneration"
    FILTER = "Filter"


#: The five records every successful joke trace must contain, in order.
REQUIRED_TRACE_ORDER = (
    Stage.HANDLE_SELECTION,
    Stage.ASSOCIATIONS_A,
    Stage.ASSOCIATIONS_B,
    Stage.PUNCHLINE_CREATION,
    Stage.ANGLE_GENERATION,
)


class TopicValidationError(ValueError):
    """Input text cannot be used as a joke topic."""

    code = "TopicValidationError"


class EmptyTopic(TopicValidationError):
    code = "EmptyTopic"


class MultiLineTopic(TopicValidationError):
    code = "MultiLineTopic"


class TopicTooLong(TopicValidationError):
    code = "TopicTooLong"


class TooFewTokens(TopicValidationError):
    code = "TooFewTokens"


def normalize_for_match(s: str) -> str:
    """Canonical form used for every handle/punch-line comparison.

    Applies, in order: Unicode NFC, lowercasing, replacement of each
    non-alphanumeric character with a space, collapse of space runs, trim.
    Idempotent, so normalized text can be re-normalized safely.
    """
    s = unicodedata.normalize("NFC", s).lower()
    s = "".join(ch if ch.isalnum() else " " for ch in s)
    return " ".join(s.split())


def ends_with_punchline(joke_text: str, punchline_text: str) -> bool:
    """True iff the joke's final tokens are exactly the punch line's tokens.

    Comparison happens on normalized token sequences, so case and
    punctuation differences are ignored and partial-word matches
    ("art" inside "smart") never count.
    """
    joke_tokens = normalize_for_match(joke_text).split()
    punch_tokens = normalize_for_match(punchline_text).split()
    if len(punch_tokens) > len(joke_tokens):
        return False
    return joke_tokens[len(joke_tokens) - len(punch_tokens):] == punch_tokens


def handle_occurs_in_topic(handle: str, topic_text: str) -> bool:
    """True iff the handle appears in the topic as a contiguous token run."""
    handle_tokens = normalize_for_match(handle).split()
    topic_tokens = normalize_for_match(topic_text).split()
    m = len(handle_tokens)
    return any(
        topic_tokens[i:i + m] == handle_tokens
        for i in range(len(topic_tokens) - m + 1)
    )


@dataclass(frozen=True)
class Topic:
    """One declarative sentence a joke is built on.

    The stored text is trimmed. Construction fails for empty, multi-line,
    over-long (> 500 chars), or too-short (< 3 tokens) input.
    """

    text: str
    id: str | None = None

    def __post_init__(self) -> None:
        trimmed = self.text.strip()
        if not trimmed:
            raise EmptyTopic("topic is empty")
        if "\n" in trimmed or "\r" in trimmed:
            raise MultiLineTopic("topic must be a single line")
        if len(trimmed) > TOPIC_MAX_CHARS:
            raise TopicTooLong(
                f"topic is {len(trimmed)} characters, limit is {TOPIC_MAX_CHARS}"
            )
        if len(trimmed.split()) < TOPIC_MIN_TOKENS:
            raise TooFewTokens(
                f"topic needs at least {TOPIC_MIN_TOKENS} words"
            )
        object.__setattr__(self, "text", trimmed)


@dataclass(frozen=True)
class TopicHandles:
    """The two most attention-getting phrases picked out of the topic."""

    first: str
    second: str

    def __post_init__(self) -> None:
        if not self.first.strip() or not self.second.strip():
            raise ValueError("handles must be non-empty")
        if normalize_for_match(self.first) == normalize_for_match(self.second):
            raise ValueError(f"handles must be distinct: {self.first!r}")


@dataclass(frozen=True)
class AssociationList:
    """Things an audience readily thinks of for one topic handle."""

    handle: str
    items: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError(f"association list for {self.handle!r} is empty")
        handle_norm = normalize_for_match(self.handle)
        seen: set[str] = set()
        for item in self.items:
            if not item.strip():
                raise ValueError("association items must be non-empty")
            norm = normalize_for_match(item)
            if norm in seen:
                raise ValueError(f"duplicate association {item!r}")
            if norm == handle_norm:
                raise ValueError(
                    f"association {item!r} merely repeats the handle"
                )
            seen.add(norm)


@dataclass(frozen=True)
class PunchLine:
    """The surprising final phrase, plus the two associations it links."""

    text: str
    chosen_a: str
    chosen_b: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("punch line text is empty")
        if not self.chosen_a.strip() or not self.chosen_b.strip():
            raise ValueError("chosen associations must be non-empty")


@dataclass(frozen=True)
class StageRecord:
    """Audit record of one pipeline stage: what was asked and what came back.

    ``elapsed`` is wall-clock seconds for the stage including retries.
    """

    stage: Stage
    prompt_text: str
    raw_completion: str
    parsed_summary: str
    attempts: int
    elapsed: float

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "prompt_text": self.prompt_text,
            "raw_completion": self.raw_completion,
            "parsed_summary": self.parsed_summary,
            "attempts": self.attempts,
            "elapsed_ms": round(self.elapsed * 1000.0, 3),
        }


@dataclass(frozen=True)
class JokeResponse:
    """A finished joke with every construction artifact and a full trace.

    Construction re-checks the cross-artifact invariants, so a value of
    this type is always internally consistent: handles occur in the topic,
    the chosen associations are members of their lists, the intact flag
    agrees with ``ends_with_punchline``, and the trace holds one record
    per stage in pipeline order (an optional Filter record last).
    """

    topic: Topic
    handles: TopicHandles
    associations: tuple[AssociationList, AssociationList]
    punchline: PunchLine
    joke_text: str
    punchline_intact: bool
    trace: tuple[StageRecord, ...]

    def __post_init__(self) -> None:
        if not self.joke_text.strip():
            raise ValueError("joke_text is empty")
        for handle in (self.handles.first, self.handles.second):
            if not handle_occurs_in_topic(handle, self.topic.text):
                raise ValueError(f"handle {handle!r} does not occur in topic")
        list_a, list_b = self.associations
        if normalize_for_match(list_a.handle) != normalize_for_match(self.handles.first):
            raise ValueError("first association list is not for the first handle")
        if normalize_for_match(list_b.handle) != normalize_for_match(self.handles.second):
            raise ValueError("second association list is not for the second handle")
        norms_a = {normalize_for_match(i) for i in list_a.items}
        norms_b = {normalize_for_match(i) for i in list_b.items}
        if normalize_for_match(self.punchline.chosen_a) not in norms_a:
            raise ValueError(
                f"chosen_a {self.punchline.chosen_a!r} is not in the first list"
            )
        if normalize_for_match(self.punchline.chosen_b) not in norms_b:
            raise ValueError(
                f"chosen_b {self.punchline.chosen_b!r} is not in the second list"
            )
        if self.punchline_intact != ends_with_punchline(self.joke_text, self.punchline.text):
            raise ValueError("punchline_intact flag disagrees with the joke text")
        stages = tuple(r.stage for r in self.trace)
        if stages[:5] != REQUIRED_TRACE_ORDER or stages[5:] not in ((), (Stage.FILTER,)):
            raise ValueError(f"malformed trace: {[s.value for s in stages]}")

    def to_dict(self, include_trace: bool = False) -> dict:
        doc = {
            "topic": self.topic.text,
            "handles": {"first": self.handles.first, "second": self.handles.second},
            "associations": [
                {"handle": a.handle, "items": list(a.items)}
                for a in self.associations
            ],
            "punchline": {
                "text": self.punchline.text,
                "chosen_a": self.punchline.chosen_a,
                "chosen_b": self.punchline.chosen_b,
            },
            "joke_text": self.joke_text,
            "punchline_intact": self.punchline_intact,
        }
        if include_trace:
            doc["trace"] = [r.to_dict() for r in self.trace]
        return doc

    def to_json(self, include_trace: bool = False, indent: int | None = None) -> str:
        return json.dumps(
            self.to_dict(include_trace=include_trace),
            ensure_ascii=False,
            indent=indent,
        )
