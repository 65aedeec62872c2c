from __future__ import annotations

import itertools

import numpy as np
import pytest

from scd.constraints import ArgSpec, ConstraintTable, FunctionSpec, Requirement
from scd.engine import (
    ConstraintMachine,
    GenerationState,
    IllegalToken,
    IllegalTransition,
    Phase,
    StructuralToken,
    StructuralTokenError,
    Verdict,
    finalize_or_continue,
    transition,
)
from scd.tokenizer import Vocab

ARGS = frozenset({"cuisine", "city", "price_range", "has_live_music", "serves_alcohol"})


def feed(machine, text_units):
    """Drive the machine through unit strings and structural surfaces."""
    state = machine.initial()
    events = []
    for unit in text_units:
        ids = [machine.vocab.id_of(unit)] if unit in '.(),="' and len(unit) == 1 else machine.vocab.encode(unit)
        for tid in ids:
            assert tid in machine.allowed(state), (unit, state.phase)
            state, ev = machine.advance(state, tid)
            if ev:
                events.append(ev)
    return state, events


def test_equal_on_cuisine_gives_value_trie(table, vocab):
    m = ConstraintMachine(table, vocab)
    state, _ = feed(m, ["Restaurants_1", ".", "FindRestaurants", "(", "cuisine", "="])
    assert state.phase is Phase.ARG_VALUE_CLOSED
    assert state.pending_arg == "cuisine"
    assert state.decoded_package == "Restaurants_1" and state.decoded_function == "FindRestaurants"
    # walk the value trie beneath the cursor: exactly the five cuisine encodings
    paths, stack = [], [((), state.trie_cursor)]
    while stack:
        p, node = stack.pop()
        if node.terminal:
            paths.append(p)
        stack += [(p + (t,), c) for t, c in node.children.items()]
    cuisines = ["Mexican", "Chinese", "Indian", "American", "Italian"]
    assert sorted(paths) == sorted(tuple(vocab.encode(c)) for c in cuisines)


def test_open_value_phase(table, vocab):
    m = ConstraintMachine(table, vocab)
    state, _ = feed(m, ["Restaurants_1", ".", "FindRestaurants", "(", "city", "="])
    assert state.phase is Phase.ARG_VALUE_OPEN
    assert m.allowed(state) == (m.quote,)
    state, _ = m.advance(state, m.quote)
    allowed = set(m.allowed(state))
    assert m.quote in allowed and m.comma in allowed and m.right_bracket in allowed
    assert all('"' not in vocab.piece(i) or i == m.quote for i in allowed)


def test_dot_with_empty_package_is_illegal(table, vocab):
    m = ConstraintMachine(table, vocab)
    with pytest.raises(IllegalTransition):
        m.transition(m.initial(), StructuralToken.DOT)
    with pytest.raises(IllegalTransition):
        transition(None, StructuralToken.COMMA, table, vocab)
    with pytest.raises(IllegalTransition):
        m.transition(m.initial(), StructuralToken.S)


def test_comma_excludes_emitted(table, vocab):
    m = ConstraintMachine(table, vocab)
    state, _ = feed(m, ["Restaurants_1", ".", "FindRestaurants", "(", "city", "=", '"', "Napa", '"', ","])
    assert state.phase is Phase.ARG_NAME
    # reachable names from the cursor, as whole strings
    names, stack = set(), [("", state.trie_cursor)]
    while stack:
        text, node = stack.pop()
        if node.terminal:
            names.add(text)
        stack += [(text + vocab.piece(t), c) for t, c in node.children.items()]
    assert names == ARGS - {"city"}


def test_force_comma_when_required_missing(table, vocab):
    m = ConstraintMachine(table, vocab)
    state, _ = feed(
        m, ["Restaurants_1", ".", "FindRestaurants", "(", "city", "=", '"', "Napa", '"', ",", "price_range", "=", '"', "cheap", '"']
    )
    assert state.phase is Phase.VALUE_END
    assert finalize_or_continue(state, table) is Verdict.FORCE_COMMA
    assert m.allowed(state) == (m.comma,)
    assert m.transition(state, StructuralToken.RIGHT_BRACKET).phase is Phase.ARG_NAME
    with pytest.raises(IllegalToken):
        m.advance(state, m.right_bracket)
    state, event = m.advance(state, m.comma)
    assert event == ("force_comma", ("cuisine",))


def test_finish_and_done(table, vocab):
    m = ConstraintMachine(table, vocab)
    state, events = feed(
        m,
        ["Restaurants_1", ".", "FindRestaurants", "(", "cuisine", "=", '"', "Indian", '"', ",", "city", "=", '"', "Napa", '"', ")"],
    )
    assert state.phase is Phase.DONE
    assert events == [
        ("package", "Restaurants_1"),
        ("function", "FindRestaurants"),
        ("arg", "cuisine"),
        ("value", ("cuisine", "Indian")),
        ("force_comma", ("city",)),
        ("arg", "city"),
        ("value", ("city", "Napa")),
        ("done", None),
    ]


def test_closed_value_rejects_undocumented(table, vocab):
    m = ConstraintMachine(table, vocab)
    state, _ = feed(m, ["Restaurants_1", ".", "FindRestaurants", "(", "cuisine", "=", '"'])
    burg = vocab.id_of("Burg")
    assert burg not in m.allowed(state)
    with pytest.raises(IllegalToken):
        m.advance(state, burg)


def test_zero_arg_function():
    t = ConstraintTable({"P": {"f": FunctionSpec("f")}})
    v = Vocab.from_pieces(list('Pf.(),="'))
    m = ConstraintMachine(t, v)
    state, _ = feed(m, ["P", ".", "f", "("])
    assert m.allowed(state) == (m.right_bracket,)
    assert finalize_or_continue(state, t) is Verdict.FINISH


def test_empty_arg_list_needs_no_required():
    t = ConstraintTable({"P": {"f": FunctionSpec("f", (ArgSpec("a", Requirement.REQUIRED, ("x",)),))}})
    m = ConstraintMachine(t, Vocab.from_pieces(list('Pfax.(),="')))
    state, _ = feed(m, ["P", ".", "f", "("])
    assert m.right_bracket not in m.allowed(state)
    with pytest.raises(IllegalTransition):
        m.transition(state, StructuralToken.RIGHT_BRACKET)


def test_structural_pieces_must_be_single_tokens(table):
    with pytest.raises(StructuralTokenError):
        ConstraintMachine(table, Vocab.from_pieces(list("abc.(),=")))


def test_verdict_is_subset_check():
    # subset-check oracle over random required and emitted sets
    rng = np.random.default_rng(3)
    names = [f"a{i}" for i in range(6)]
    for _ in range(300):
        req = {n for n in names if rng.random() < 0.4}
        emitted = [n for n in names if rng.random() < 0.5]
        spec = FunctionSpec(
            "f", tuple(ArgSpec(n, Requirement.REQUIRED if n in req else Requirement.OPTIONAL) for n in names)
        )
        t = ConstraintTable({"P": {"f": spec}})
        state = GenerationState(
            Phase.VALUE_END, "P", "f", tuple((n, "v") for n in emitted)
        )
        expected = Verdict.FINISH if req <= set(emitted) else Verdict.FORCE_COMMA
        assert finalize_or_continue(state, t) is expected


def test_prefix_overlapping_package_names():
    t = ConstraintTable({"a": {"f": FunctionSpec("f")}, "ab": {"g": FunctionSpec("g")}})
    v = Vocab.from_pieces(list('abfg.(),="'))
    m = ConstraintMachine(t, v)
    state, _ = m.advance(m.initial(), v.id_of("a"))
    # terminal with children: both the DOT and the continuation are open
    assert set(m.allowed(state)) == {v.id_of("."), v.id_of("b")}
    for pkg, fn in (("a", "f"), ("ab", "g")):
        s, _ = feed(m, [pkg, ".", fn, "(", ")"])
        assert s.phase is Phase.DONE and s.decoded_package == pkg
