from __future__ import annotations

import sys

import pytest

from scd.constraints import extract_constraints
from scd.context import PromptContext
from scd.tokenizer import Vocab

RESTAURANT_DOC = (
    '...... Restaurants_1.FindRestaurants("cuisine" : Required, "city" : Required, '
    '"price_range" : Optional, "has_live_music" : Optional, "serves_alcohol" : Optional) '
    '...... the possible values for "cuisine" include '
    '["Mexican", "Chinese", "Indian", "American", "Italian"] ......'
)

GOLD_CALL = 'Restaurants_1.FindRestaurants(city="Mountain View",cuisine="American",price_range="moderate")'

CONVERSATION = (
    ("Human", "I want to find a burger place in Mountain View."),
    ("Assistant", "Any price range in mind?"),
    ("Human", "Something moderate please."),
)


def restaurant_vocab(extra_text: str = "") -> Vocab:
    """Character pieces plus the sub-words that split ``Restaurants_1`` into five tokens."""
    chars = set(RESTAURANT_DOC + GOLD_CALL + "Burgers Napa cheap" + extra_text) | set('.(),="')
    chars.discard("\n")
    return Vocab.from_pieces(["Rest", "aur", "ants", "Find", "Burg"] + sorted(chars))


@pytest.fixture
def table():
    return extract_constraints(RESTAURANT_DOC)


@pytest.fixture
def vocab():
    return restaurant_vocab()


@pytest.fixture
def context():
    return PromptContext(api_doc=RESTAURANT_DOC, conversation=CONVERSATION)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
