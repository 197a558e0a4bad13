from __future__ import annotations

import json
from pathlib import Path

import pytest

from witscript2.backend import ScriptedBackend, substring_entry

FIXTURES = Path(__file__).parent / "fixtures"

WORKED_EXAMPLE_TOPIC = (
    "The U.S. is planning to buy 22 aging fighter jets from Switzerland."
)
WORKED_EXAMPLE_JOKE = "I hear they're delicious Swiss Chocolate F-22s."
WORKED_EXAMPLE_PUNCHLINE = "Swiss Chocolate F-22s"


def worked_example_entries():
    """The five canned completions of the flagship run, keyed by prompt text."""
    raw = json.loads((FIXTURES / "worked_example_script.json").read_text("utf-8"))
    return [substring_entry(item["pattern"], item["response"]) for item in raw]


@pytest.fixture
def worked_example_backend() -> ScriptedBackend:
    return ScriptedBackend(worked_example_entries())


@pytest.fixture
def worked_example_script_path() -> Path:
    return FIXTURES / "worked_example_script.json"


@pytest.fixture
def truncated_script_path() -> Path:
    return FIXTURES / "truncated_script.json"
