"""The five-stage pipeline: per-stage contracts, retries, filtering, assembly."""

from __future__ import annotations

import pytest

from witscript2.backend import (
    ScriptExhausted,
    ScriptedBackend,
    any_entry,
    substring_entry,
)
from witscript2.domain import (
    AssociationList,
    EmptyTopic,
    JokeResponse,
    PunchLine,
    Stage,
    StageRecord,
    Topic,
    TopicHandles,
    TopicTooLong,
)
from witscript2.pipeline import (
    BackendStageError,
    ChosenNotInList,
    FilterPolicy,
    HandleNotInTopic,
    JokeRejected,
    PipelineConfig,
    PunchlineDropped,
    StageParseError,
    create_punchline,
    filter_joke,
    generate_angle,
    generate_associations,
    generate_joke,
    parse_numbered_list,
    run_batch,
    select_handles,
    validate_topic,
)
from witscript2.prompts import default_prompt_set

from conftest import (
    WORKED_EXAMPLE_JOKE,
    WORKED_EXAMPLE_PUNCHLINE,
    WORKED_EXAMPLE_TOPIC,
    worked_example_entries,
)

PROMPTS = default_prompt_set()
CONFIG = PipelineConfig()


def topic():
    return validate_topic(WORKED_EXAMPLE_TOPIC)


class TestValidateTopic:
    def test_worked_example(self):
        assert topic().text == WORKED_EXAMPLE_TOPIC

    def test_empty(self):
        with pytest.raises(EmptyTopic):
            validate_topic("")

    def test_600_char_line(self):
        with pytest.raises(TopicTooLong):
            validate_topic("x" * 200 + " y " + "z" * 400)


class TestParseNumberedList:
    def test_numbered(self):
        assert parse_numbered_list("1. F-22 Raptor\n2. cockpit") == [
            "F-22 Raptor", "cockpit",
        ]

    def test_empty(self):
        assert parse_numbered_list("") == []

    def test_no_dedupe(self):
        assert parse_numbered_list("- a\n- a\n- b") == ["a", "a", "b"]

    def test_mixed_forms(self):
        raw = "1) one\n- two\nthree\n\n4. four"
        assert parse_numbered_list(raw) == ["one", "two", "three", "four"]

    def test_negative_number_is_bare_line(self):
        assert parse_numbered_list("-5 degrees outside") == ["-5 degrees outside"]


class TestSelectHandles:
    def test_worked_example(self):
        backend = ScriptedBackend([any_entry("1. fighter jets\n2. Switzerland")])
        handles, record = select_handles(topic(), backend, PROMPTS, CONFIG)
        assert (handles.first, handles.second) == ("fighter jets", "Switzerland")
        assert record.stage is Stage.HANDLE_SELECTION
        assert record.attempts == 1

    def test_handle_not_in_topic_after_retries(self):
        backend = ScriptedBackend(
            [any_entry("1. pizza\n2. Switzerland")] * (1 + CONFIG.retries_per_stage)
        )
        with pytest.raises(HandleNotInTopic) as excinfo:
            select_handles(topic(), backend, PROMPTS, CONFIG)
        assert excinfo.value.stage is Stage.HANDLE_SELECTION

    def test_retry_then_success_counts_attempts(self):
        backend = ScriptedBackend(
            [any_entry("no list here"), any_entry("1. fighter jets\n2. Switzerland")]
        )
        handles, record = select_handles(topic(), backend, PROMPTS, CONFIG)
        assert handles.second == "Switzerland"
        assert record.attempts == 2

    def test_duplicate_handles_rejected(self):
        backend = ScriptedBackend(
            [any_entry("1. Switzerland\n2. switzerland!")]
            * (1 + CONFIG.retries_per_stage)
        )
        with pytest.raises(StageParseError):
            select_handles(topic(), backend, PROMPTS, CONFIG)


class TestGenerateAssociations:
    def test_worked_example_lists(self):
        backend = ScriptedBackend([
            any_entry("1. F-22 Raptor\n2. cockpit"),
            any_entry("1. Swiss chocolate\n2. the Alps"),
        ])
        list_a, record_a = generate_associations(
            "fighter jets", topic(), backend, PROMPTS, CONFIG,
            trace_stage=Stage.ASSOCIATIONS_A,
        )
        list_b, record_b = generate_associations(
            "Switzerland", topic(), backend, PROMPTS, CONFIG,
            trace_stage=Stage.ASSOCIATIONS_B,
        )
        assert "F-22 Raptor" in list_a.items
        assert "Swiss chocolate" in list_b.items
        assert record_a.stage is Stage.ASSOCIATIONS_A
        assert record_b.stage is Stage.ASSOCIATIONS_B

    def test_self_association_only_fails(self):
        backend = ScriptedBackend(
            [any_entry("1. Switzerland")] * (1 + CONFIG.retries_per_stage)
        )
        with pytest.raises(StageParseError):
            generate_associations("Switzerland", topic(), backend, PROMPTS, CONFIG)

    def test_dedupe_and_truncation_to_k(self):
        raw = "\n".join(f"{i}. item {i % 4}" for i in range(1, 9))
        backend = ScriptedBackend([any_entry(raw)])
        config = PipelineConfig(associations_per_handle=3)
        assoc, _ = generate_associations(
            "fighter jets", topic(), backend, PROMPTS, config
        )
        assert len(assoc.items) == 3
        assert len({i for i in assoc.items}) == 3


def _lists():
    return (
        AssociationList("fighter jets", ("F-22 Raptor", "cockpit")),
        AssociationList("Switzerland", ("Swiss chocolate", "the Alps")),
    )


class TestCreatePunchline:
    def test_worked_example(self):
        list_a, list_b = _lists()
        backend = ScriptedBackend([
            any_entry(
                "A: F-22 Raptor | B: Swiss chocolate | PUNCHLINE: Swiss Chocolate F-22s"
            )
        ])
        punchline, record = create_punchline(list_a, list_b, backend, PROMPTS, CONFIG)
        assert punchline.text == WORKED_EXAMPLE_PUNCHLINE
        assert punchline.chosen_a == "F-22 Raptor"
        assert punchline.chosen_b == "Swiss chocolate"
        assert record.stage is Stage.PUNCHLINE_CREATION

    def test_chosen_not_in_list(self):
        list_a, list_b = _lists()
        backend = ScriptedBackend(
            [any_entry("A: F-22 Raptor | B: Alps cheese | PUNCHLINE: nope")]
            * (1 + CONFIG.retries_per_stage)
        )
        with pytest.raises(ChosenNotInList) as excinfo:
            create_punchline(list_a, list_b, backend, PROMPTS, CONFIG)
        assert excinfo.value.stage is Stage.PUNCHLINE_CREATION

    def test_single_item_lists(self):
        list_a = AssociationList("a b c", ("x",))
        list_b = AssociationList("d e f", ("y",))
        backend = ScriptedBackend([any_entry("A: x | B: y | PUNCHLINE: xy")])
        punchline, _ = create_punchline(list_a, list_b, backend, PROMPTS, CONFIG)
        assert (punchline.text, punchline.chosen_a, punchline.chosen_b) == ("xy", "x", "y")

    def test_malformed_form_retried_then_fails(self):
        list_a, list_b = _lists()
        backend = ScriptedBackend(
            [any_entry("here is a punch line I guess")] * (1 + CONFIG.retries_per_stage)
        )
        with pytest.raises(StageParseError):
            create_punchline(list_a, list_b, backend, PROMPTS, CONFIG)


ARBYS_TOPIC = (
    "Today the Arby's fast food chain announced the release of a vodka that "
    "tastes like their French fries."
)
ARBYS_REPLY = "The good news is, now you can get drunk and fat at the same time."


class TestGenerateAngle:
    def test_intact_worked_example(self):
        punchline = PunchLine(WORKED_EXAMPLE_PUNCHLINE, "F-22 Raptor", "Swiss chocolate")
        backend = ScriptedBackend([any_entry(WORKED_EXAMPLE_JOKE)])
        (joke_text, intact), record = generate_angle(
            topic(), punchline, backend, PROMPTS, CONFIG
        )
        assert joke_text == WORKED_EXAMPLE_JOKE
        assert intact is True
        assert record.stage is Stage.ANGLE_GENERATION

    def test_lenient_mode_accepts_replaced_punchline(self):
        punchline = PunchLine("Smirnoff and McDonald's", "Smirnoff", "McDonald's")
        backend = ScriptedBackend([any_entry(ARBYS_REPLY)])
        (joke_text, intact), _ = generate_angle(
            validate_topic(ARBYS_TOPIC), punchline, backend, PROMPTS, CONFIG
        )
        assert joke_text == ARBYS_REPLY
        assert intact is False

    def test_strict_mode_rejects_replaced_punchline(self):
        punchline = PunchLine("Smirnoff and McDonald's", "Smirnoff", "McDonald's")
        config = PipelineConfig(strict_punchline=True)
        backend = ScriptedBackend(
            [any_entry(ARBYS_REPLY)] * (1 + config.retries_per_stage)
        )
        with pytest.raises(PunchlineDropped) as excinfo:
            generate_angle(
                validate_topic(ARBYS_TOPIC), punchline, backend, PROMPTS, config
            )
        assert excinfo.value.stage is Stage.ANGLE_GENERATION

    def test_joke_prefix_stripped(self):
        punchline = PunchLine("x y", "x", "y")
        backend = ScriptedBackend([any_entry("Joke: something about x y")])
        (joke_text, intact), _ = generate_angle(
            validate_topic("a b c d"), punchline, backend, PROMPTS, CONFIG
        )
        assert joke_text == "something about x y"
        assert intact is True


def _candidate(joke_text, intact, topic_text=WORKED_EXAMPLE_TOPIC):
    trace = tuple(
        StageRecord(stage, "p", "r", "s", 1, 0.0)
        for stage in (
            Stage.HANDLE_SELECTION, Stage.ASSOCIATIONS_A, Stage.ASSOCIATIONS_B,
            Stage.PUNCHLINE_CREATION, Stage.ANGLE_GENERATION,
        )
    )
    return JokeResponse(
        topic=Topic(topic_text),
        handles=TopicHandles("fighter jets", "Switzerland"),
        associations=_lists(),
        punchline=PunchLine("y", "F-22 Raptor", "Swiss chocolate"),
        joke_text=joke_text,
        punchline_intact=intact,
        trace=trace,
    )


class TestFilterJoke:
    def test_off_always_accepts(self):
        decision = filter_joke(_candidate("x", False), PipelineConfig())
        assert (decision.accept, decision.score) == (True, 1.0)

    def test_heuristic_full_marks(self):
        candidate = _candidate("a joke of exactly eight tokens ending y", True)
        decision = filter_joke(
            candidate, PipelineConfig(filter_policy=FilterPolicy.HEURISTIC)
        )
        assert decision.accept is True
        assert decision.score == 1.0

    def test_heuristic_single_token_replacement(self):
        # joke "x", punch line "y": not intact, 1 token, novel -> 0.3, reject
        decision = filter_joke(
            _candidate("x", False), PipelineConfig(filter_policy=FilterPolicy.HEURISTIC)
        )
        assert decision.accept is False
        assert decision.score == 0.3

    def test_heuristic_echoing_topic_loses_novelty(self):
        candidate = _candidate(WORKED_EXAMPLE_TOPIC, False)
        decision = filter_joke(
            candidate, PipelineConfig(filter_policy=FilterPolicy.HEURISTIC)
        )
        assert decision.score == 0.3  # in bounds only

    def test_model_judged_accepts_on_3(self):
        backend = ScriptedBackend([any_entry("3")])
        decision = filter_joke(
            _candidate("a decent joke ending with y", True),
            PipelineConfig(filter_policy=FilterPolicy.MODEL_JUDGED),
            backend,
            PROMPTS,
        )
        assert decision.accept is True
        assert decision.record is not None
        assert decision.record.stage is Stage.FILTER

    def test_model_judged_rejects_below_3(self):
        backend = ScriptedBackend([any_entry("Rating: 1")])
        decision = filter_joke(
            _candidate("a weak joke here y", True),
            PipelineConfig(filter_policy=FilterPolicy.MODEL_JUDGED),
            backend,
            PROMPTS,
        )
        assert decision.accept is False
        assert decision.score == 0.0


class TestGenerateJoke:
    def test_worked_example_end_to_end(self):
        backend = ScriptedBackend(worked_example_entries())
        response = generate_joke(WORKED_EXAMPLE_TOPIC, backend, PROMPTS, CONFIG)
        assert response.joke_text == WORKED_EXAMPLE_JOKE
        assert response.punchline_intact is True
        assert (response.handles.first, response.handles.second) == (
            "fighter jets", "Switzerland",
        )
        assert "F-22 Raptor" in response.associations[0].items
        assert "Swiss chocolate" in response.associations[1].items
        assert response.punchline.text == WORKED_EXAMPLE_PUNCHLINE
        assert len(backend.transcript) == 5
        assert backend.fully_consumed
        assert [r.stage for r in response.trace] == [
            Stage.HANDLE_SELECTION, Stage.ASSOCIATIONS_A, Stage.ASSOCIATIONS_B,
            Stage.PUNCHLINE_CREATION, Stage.ANGLE_GENERATION,
        ]

    def test_empty_input_makes_no_backend_calls(self):
        backend = ScriptedBackend(worked_example_entries())
        with pytest.raises(EmptyTopic):
            generate_joke("", backend, PROMPTS, CONFIG)
        assert backend.transcript == ()

    def test_truncated_script_fails_at_punchline_stage(self):
        backend = ScriptedBackend(worked_example_entries()[:3])
        with pytest.raises(BackendStageError) as excinfo:
            generate_joke(WORKED_EXAMPLE_TOPIC, backend, PROMPTS, CONFIG)
        assert excinfo.value.stage is Stage.PUNCHLINE_CREATION
        assert isinstance(excinfo.value.cause, ScriptExhausted)
        assert excinfo.value.code == "ScriptExhausted"

    def test_model_judged_filter_makes_six_calls(self):
        backend = ScriptedBackend([*worked_example_entries(), any_entry("4")])
        config = PipelineConfig(filter_policy=FilterPolicy.MODEL_JUDGED)
        response = generate_joke(WORKED_EXAMPLE_TOPIC, backend, PROMPTS, config)
        assert len(backend.transcript) == 6
        assert [r.stage for r in response.trace][-1] is Stage.FILTER

    def test_filter_rejection_carries_candidate(self):
        backend = ScriptedBackend([*worked_example_entries(), any_entry("2")])
        config = PipelineConfig(filter_policy=FilterPolicy.MODEL_JUDGED)
        with pytest.raises(JokeRejected) as excinfo:
            generate_joke(WORKED_EXAMPLE_TOPIC, backend, PROMPTS, config)
        assert excinfo.value.candidate.joke_text == WORKED_EXAMPLE_JOKE
        assert excinfo.value.score == pytest.approx(1 / 3)

    def test_deterministic_serialization(self):
        results = []
        for _ in range(2):
            backend = ScriptedBackend(worked_example_entries())
            response = generate_joke(WORKED_EXAMPLE_TOPIC, backend, PROMPTS, CONFIG)
            doc = response.to_dict(include_trace=True)
            for record in doc["trace"]:
                record["elapsed_ms"] = 0.0
            results.append(doc)
        assert results[0] == results[1]

    def test_retry_budget_bounds_total_calls(self):
        config = PipelineConfig(retries_per_stage=1)
        # Handle stage burns its full budget, then everything else succeeds.
        backend = ScriptedBackend([
            any_entry("nope"),
            any_entry("1. fighter jets\n2. Switzerland"),
            *worked_example_entries()[1:],
        ])
        response = generate_joke(WORKED_EXAMPLE_TOPIC, backend, PROMPTS, config)
        assert response.trace[0].attempts == 2
        assert all(
            record.attempts <= 1 + config.retries_per_stage
            for record in response.trace
        )
        assert len(backend.transcript) == 6


class TestRunBatch:
    def test_order_preserved_with_parallelism(self):
        topics = [
            f"Update number {i}: the mayor's parrot heckled the city council again."
            for i in range(1, 14)
        ]
        entries = []
        for _ in topics:
            entries.extend([
                substring_entry("attention-getting", "1. parrot\n2. city council"),
                substring_entry("Handle: parrot", "1. crackers\n2. feathers"),
                substring_entry("Handle: city council", "1. budget meetings\n2. zoning"),
                substring_entry(
                    "Combine one association",
                    "A: crackers | B: budget meetings | PUNCHLINE: the Cracker Budget",
                ),
                substring_entry(
                    "ends with the punch line",
                    "Next on the agenda, approving the Cracker Budget.",
                ),
            ])
        backend = ScriptedBackend(entries)
        items = run_batch(topics, backend, PROMPTS, CONFIG, parallel=4)
        assert [item.index for item in items] == list(range(13))
        assert [item.input_text for item in items] == topics
        assert all(item.ok for item in items)
        assert all(
            item.response.topic.text == topics[i] for i, item in enumerate(items)
        )

    def test_failures_do_not_stop_the_run(self):
        topics = ["", WORKED_EXAMPLE_TOPIC, "xx"]
        backend = ScriptedBackend(worked_example_entries())
        items = run_batch(topics, backend, PROMPTS, CONFIG)
        assert [item.ok for item in items] == [False, True, False]
        assert isinstance(items[0].error, EmptyTopic)
