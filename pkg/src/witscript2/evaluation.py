"""Rating-study data model and statistics.

Loads crowdsourced 1-4 ratings, computes per-response and per-system
aggregates, generates the seeded presentation order shown to every rater,
and exposes the bundled 52-pair study corpus (13 inputs x 4 sources).
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

RATING_MIN = 1
RATING_MAX = 4
INPUT_COUNT = 13
RATINGS_HEADER = ["pair_id", "rater_id", "rating"]


class EvalError(Exception):
    """Base class for evaluation-harness failures."""


class RatingsParseError(EvalError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RatingOutOfRange(EvalError):
    def __init__(self, line: int, value: int):
        super().__init__(
            f"line {line}: rating {value} outside {RATING_MIN}..{RATING_MAX}"
        )
        self.line = line
        self.value = value


class DuplicateRating(EvalError):
    def __init__(self, pair_id: str, rater_id: str):
        super().__init__(f"duplicate rating for pair {pair_id!r} by rater {rater_id!r}")
        self.pair_id = pair_id
        self.rater_id = rater_id


class EmptyInput(EvalError):
    pass


class ShapeError(EvalError):
    pass


class UnknownPair(EvalError):
    def __init__(self, pair_id: str):
        super().__init__(f"pair {pair_id!r} missing from the pair-source map")
        self.pair_id = pair_id


class Source(str, Enum):
    """The four response sources compared in the rating study."""

    BASELINE = "baseline"
    WITSCRIPT = "witscript"
    WITSCRIPT2 = "witscript2"
    HUMAN = "human"

    @property
    def label(self) -> str:
        return _SOURCE_LABELS[self]


_SOURCE_LABELS = {
    Source.BASELINE: "GPT-3",
    Source.WITSCRIPT: "Witscript",
    Source.WITSCRIPT2: "Witscript 2",
    Source.HUMAN: "Human",
}

SOURCE_ORDER = (Source.BASELINE, Source.WITSCRIPT, Source.WITSCRIPT2, Source.HUMAN)


@dataclass(frozen=True)
class RatingRecord:
    """One rater's 1-4 judgment of one input/response pair."""

    pair_id: str
    rater_id: str
    rating: int

    def __post_init__(self) -> None:
        if not RATING_MIN <= self.rating <= RATING_MAX:
            raise ValueError(f"rating {self.rating} outside {RATING_MIN}..{RATING_MAX}")


@dataclass(frozen=True)
class ResponsePair:
    """One input sentence with one source's response and its mean rating."""

    input_id: int
    source: Source
    input_text: str
    response_text: str
    mean_rating: float

    def __post_init__(self) -> None:
        if not 1 <= self.input_id <= INPUT_COUNT:
            raise ValueError(f"input_id {self.input_id} outside 1..{INPUT_COUNT}")
        if not RATING_MIN <= self.mean_rating <= RATING_MAX:
            raise ValueError(f"mean_rating {self.mean_rating} outside the scale")

    def to_dict(self) -> dict:
        return {
            "input_id": self.input_id,
            "source": self.source.value,
            "input_text": self.input_text,
            "response_text": self.response_text,
            "mean_rating": self.mean_rating,
        }


@dataclass(frozen=True)
class SystemStats:
    """Per-source aggregate: mean rating and percentage rated 3 or 4."""

    source: Source
    mean_rating: float
    pct_jokes: float

    def to_dict(self) -> dict:
        return {
            "source": self.source.value,
            "label": self.source.label,
            "mean_rating": self.mean_rating,
            "pct_jokes": self.pct_jokes,
        }


def round_half_away_from_zero(value: float, ndigits: int = 2) -> float:
    """Display rounding used for all reported stats (ties go away from zero)."""
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def load_ratings(path: str | Path) -> list[RatingRecord]:
    """Parse a ratings CSV with header ``pair_id,rater_id,rating``.

    Rejects out-of-range ratings and duplicate (pair, rater) keys; the study
    format assumes complete, deduplicated exports.
    """
    records: list[RatingRecord] = []
    seen: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RATINGS_HEADER:
            raise RatingsParseError(1, f"expected header {','.join(RATINGS_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise RatingsParseError(line, f"expected 3 fields, got {len(row)}")
            pair_id, rater_id, rating_text = (field.strip() for field in row)
            if not pair_id or not rater_id:
                raise RatingsParseError(line, "empty pair_id or rater_id")
            try:
                rating = int(rating_text)
            except ValueError:
                raise RatingsParseError(line, f"rating {rating_text!r} is not an integer")
            if not RATING_MIN <= rating <= RATING_MAX:
                raise RatingOutOfRange(line, rating)
            key = (pair_id, rater_id)
            if key in seen:
                raise DuplicateRating(pair_id, rater_id)
            seen.add(key)
            records.append(RatingRecord(pair_id, rater_id, rating))
    return records


def mean_rating(records: Sequence[RatingRecord]) -> float:
    if not records:
        raise EmptyInput("no ratings to average")
    return sum(r.rating for r in records) / len(records)


def pct_jokes(records: Sequence[RatingRecord]) -> float:
    """Percentage of ratings that call the response a joke (3 or 4)."""
    if not records:
        raise EmptyInput("no ratings to count")
    joke_count = sum(1 for r in records if r.rating >= 3)
    return 100.0 * joke_count / len(records)


def source_mean_of_means(pairs: Iterable[ResponsePair]) -> dict[Source, float]:
    """Unrounded per-source mean of the 13 per-response mean ratings."""
    by_source: dict[Source, list[float]] = {s: [] for s in SOURCE_ORDER}
    for pair in pairs:
        by_source[pair.source].append(pair.mean_rating)
    for source, means in by_source.items():
        if len(means) != INPUT_COUNT:
            raise ShapeError(
                f"{source.label} has {len(means)} pairs, expected {INPUT_COUNT}"
            )
    return {s: sum(v) / len(v) for s, v in by_source.items()}


def table2_from_means(pairs: Iterable[ResponsePair]) -> dict[Source, float]:
    """Per-source mean-of-means, rounded half-away-from-zero to 2 decimals."""
    return {
        source: round_half_away_from_zero(value)
        for source, value in source_mean_of_means(pairs).items()
    }


def system_stats(
    records: Sequence[RatingRecord],
    pair_source_map: Mapping[str, Source],
) -> list[SystemStats]:
    """Group raw ratings by source and aggregate each group."""
    grouped: dict[Source, list[RatingRecord]] = {}
    for record in records:
        if record.pair_id not in pair_source_map:
            raise UnknownPair(record.pair_id)
        grouped.setdefault(pair_source_map[record.pair_id], []).append(record)
    return [
        SystemStats(
            source=source,
            mean_rating=round_half_away_from_zero(mean_rating(grouped[source])),
            pct_jokes=round_half_away_from_zero(pct_jokes(grouped[source])),
        )
        for source in SOURCE_ORDER
        if source in grouped
    ]


def presentation_order(pairs: Sequence, seed: int) -> list[int]:
    """Uniform random permutation of pair indices, fixed by the seed.

    Drawn once per study and shown in the same order to every rater.
    Uses the stdlib Mersenne Twister, so the same seed reproduces the
    same order across processes and machines.
    """
    if not pairs:
        raise EmptyInput("no pairs to order")
    indices = list(range(len(pairs)))
    random.Random(seed).shuffle(indices)
    return indices


@lru_cache(maxsize=1)
def bundled_corpus() -> tuple[ResponsePair, ...]:
    """The 52 bundled input/response pairs with their published mean ratings."""
    raw = json.loads(
        resources.files("witscript2").joinpath("data/corpus.json").read_text("utf-8")
    )
    pairs = tuple(
        ResponsePair(
            input_id=item["input_id"],
            source=Source(item["source"]),
            input_text=item["input_text"],
            response_text=item["response_text"],
            mean_rating=item["mean_rating"],
        )
        for item in raw["pairs"]
    )
    if len(pairs) != INPUT_COUNT * len(SOURCE_ORDER):
        raise ShapeError(f"bundled corpus has {len(pairs)} pairs, expected 52")
    return pairs


@lru_cache(maxsize=1)
def bundled_topics() -> tuple[tuple[int, str], ...]:
    """The 13 distinct input topics of the bundled corpus, by input id."""
    topics: dict[int, str] = {}
    for pair in bundled_corpus():
        topics.setdefault(pair.input_id, pair.input_text)
    return tuple(sorted(topics.items()))
