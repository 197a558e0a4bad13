"""Prompt templates for the model-backed stages.

Templates live as plain text files (one per stage) so they can be swapped
without touching code. Each file holds optional few-shot blocks separated
by ``---`` lines, with the template body last. Loading validates that every
required stage is present and that nothing in any template quotes one of
the 13 bundled evaluation topics, which would contaminate the study.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from .domain import normalize_for_match


class PromptStage(str, Enum):
    """The model-backed stages, each with its own template file."""

    HANDLE_SELECTION = "handle_selection"
    ASSOCIATIONS = "associations"
    PUNCHLINE_CREATION = "punchline_creation"
    ANGLE_GENERATION = "angle_generation"
    FILTER = "filter"


REQUIRED_STAGES = (
    PromptStage.HANDLE_SELECTION,
    PromptStage.ASSOCIATIONS,
    PromptStage.PUNCHLINE_CREATION,
    PromptStage.ANGLE_GENERATION,
)

#: Placeholders each stage's body may reference.
STAGE_PLACEHOLDERS: dict[PromptStage, frozenset[str]] = {
    PromptStage.HANDLE_SELECTION: frozenset({"topic"}),
    PromptStage.ASSOCIATIONS: frozenset({"handle", "topic"}),
    PromptStage.PUNCHLINE_CREATION: frozenset({"assoc_list_a", "assoc_list_b"}),
    PromptStage.ANGLE_GENERATION: frozenset({"topic", "punchline"}),
    PromptStage.FILTER: frozenset({"topic", "joke"}),
}

PROMPT_FILE_SUFFIX = ".prompt"
FEW_SHOT_DELIMITER = "---"


class PromptError(Exception):
    """Base class for template problems."""


class MissingBinding(PromptError):
    def __init__(self, name: str):
        super().__init__(f"no binding supplied for placeholder {{{name}}}")
        self.name = name


class UnknownPlaceholder(PromptError):
    def __init__(self, name: str, stage: PromptStage):
        super().__init__(
            f"placeholder {{{name}}} is not defined for stage {stage.value}"
        )
        self.name = name
        self.stage = stage


class MissingStage(PromptError):
    def __init__(self, stage: PromptStage):
        super().__init__(f"no template file for required stage {stage.value}")
        self.stage = stage


class HygieneViolation(PromptError):
    def __init__(self, stage: PromptStage, topic_index: int):
        super().__init__(
            f"template for stage {stage.value} contains bundled evaluation "
            f"topic #{topic_index}"
        )
        self.stage = stage
        self.topic_index = topic_index


class PromptParseError(PromptError):
    pass


def _scan(body: str):
    """Yield ("text", chunk) and ("placeholder", name) pieces of a body.

    Placeholders are single-brace named markers; doubled braces escape a
    literal brace. Anything else brace-shaped is malformed.
    """
    i = 0
    n = len(body)
    while i < n:
        ch = body[i]
        if ch == "{":
            if body.startswith("{{", i):
                yield "text", "{"
                i += 2
                continue
            end = body.find("}", i + 1)
            name = body[i + 1:end] if end != -1 else ""
            if end == -1 or not name.replace("_", "").isalnum():
                raise PromptParseError(f"malformed placeholder at offset {i}")
            yield "placeholder", name
            i = end + 1
        elif ch == "}":
            if body.startswith("}}", i):
                yield "text", "}"
                i += 2
                continue
            raise PromptParseError(f"unmatched '}}' at offset {i}")
        else:
            nxt = min(
                (p for p in (body.find("{", i), body.find("}", i)) if p != -1),
                default=n,
            )
            yield "text", body[i:nxt]
            i = nxt


def placeholders_in(body: str) -> set[str]:
    return {name for kind, name in _scan(body) if kind == "placeholder"}


@dataclass(frozen=True)
class PromptTemplate:
    """One stage's template: optional few-shot blocks plus a body."""

    stage: PromptStage
    body: str
    few_shot: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise PromptParseError(f"empty body for stage {self.stage.value}")
        allowed = STAGE_PLACEHOLDERS[self.stage]
        for name in placeholders_in(self.body):
            if name not in allowed:
                raise UnknownPlaceholder(name, self.stage)

    def render(self, bindings: Mapping[str, str]) -> str:
        """Substitute bindings into the body, few-shot blocks prepended.

        Every placeholder in the body must be bound; binding names outside
        the stage's placeholder set are rejected.
        """
        allowed = STAGE_PLACEHOLDERS[self.stage]
        for name in bindings:
            if name not in allowed:
                raise UnknownPlaceholder(name, self.stage)
        parts: list[str] = []
        for kind, value in _scan(self.body):
            if kind == "text":
                parts.append(value)
            else:
                if value not in bindings:
                    raise MissingBinding(value)
                parts.append(bindings[value])
        return "\n\n".join([*self.few_shot, "".join(parts)])


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    return template.render(bindings)


@dataclass(frozen=True)
class PromptSet:
    """The templates for all four required stages (Filter optional)."""

    templates: Mapping[PromptStage, PromptTemplate]
    version: str = "unversioned"

    def __post_init__(self) -> None:
        for stage in REQUIRED_STAGES:
            if stage not in self.templates:
                raise MissingStage(stage)
        _check_hygiene(self.templates)

    def get(self, stage: PromptStage) -> PromptTemplate:
        if stage not in self.templates:
            raise MissingStage(stage)
        return self.templates[stage]

    @property
    def has_filter(self) -> bool:
        return PromptStage.FILTER in self.templates


def _check_hygiene(templates: Mapping[PromptStage, PromptTemplate]) -> None:
    """No template text may contain a bundled evaluation topic."""
    for stage, template in templates.items():
        for block in (template.body, *template.few_shot):
            block_norm = normalize_for_match(block)
            for topic_index, topic_norm in _bundled_topic_norms():
                if topic_norm and topic_norm in block_norm:
                    raise HygieneViolation(stage, topic_index)


@lru_cache(maxsize=1)
def _bundled_topic_norms() -> tuple[tuple[int, str], ...]:
    from .evaluation import bundled_topics

    return tuple(
        (index, normalize_for_match(text)) for index, text in bundled_topics()
    )


def parse_template_file(stage: PromptStage, text: str) -> PromptTemplate:
    """Split a template file into few-shot blocks and the body (last section)."""
    sections: list[list[str]] = [[]]
    for line in text.splitlines():
        if line.rstrip() == FEW_SHOT_DELIMITER:
            sections.append([])
        else:
            sections[-1].append(line)
    blocks = ["\n".join(lines).strip() for lines in sections]
    if any(not block for block in blocks):
        raise PromptParseError(
            f"stage {stage.value}: empty section between '---' delimiters"
        )
    return PromptTemplate(stage=stage, body=blocks[-1], few_shot=tuple(blocks[:-1]))


def load_prompt_set(directory: str | Path, version: str | None = None) -> PromptSet:
    """Load one ``<stage>.prompt`` file per stage from a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"prompt directory {directory} does not exist")
    templates: dict[PromptStage, PromptTemplate] = {}
    for stage in PromptStage:
        path = directory / f"{stage.value}{PROMPT_FILE_SUFFIX}"
        if not path.is_file():
            if stage in REQUIRED_STAGES:
                raise MissingStage(stage)
            continue
        templates[stage] = parse_template_file(stage, path.read_text("utf-8"))
    if version is None:
        version_file = directory / "VERSION"
        version = (
            version_file.read_text("utf-8").strip()
            if version_file.is_file()
            else f"dir:{directory.name}"
        )
    return PromptSet(templates=templates, version=version)


@lru_cache(maxsize=1)
def default_prompt_set() -> PromptSet:
    """The prompt set shipped with the package."""
    return load_prompt_set(Path(__file__).parent / "prompts_default")
