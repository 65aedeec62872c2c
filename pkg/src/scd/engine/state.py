"""Generation-state tracking keyed on structural tokens.

Each structural token closes one unit of the call and opens the next; the
state machine swaps in the constraint set for the new unit::

    S  -> package name       constrained by all packages
    .  -> function name      constrained by the package's functions
    (  -> argument name      constrained by the function's arguments
    =  -> argument value     closed value trie, or free text when open
    ,  -> argument name      remaining (not yet emitted) arguments
    )  -> done               only if every required argument was emitted

Values are always double-quoted. The quotes are forced tokens; a closed value
is constrained between them, an open value runs until the closing quote.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ..constraints import (
    AllPackages,
    ArgsOf,
    ConstraintTable,
    FunctionsOf,
    OPEN,
    UnknownKey,
    ValuesOf,
)
from ..tokenizer import UNK, Vocab
from ..trie import TokenTrie, TrieCache, TrieNode


class EngineError(Exception):
    pass


class IllegalTransition(EngineError):
    def __init__(self, phase, structural, reason: str = ""):
        msg = f"{structural} not legal in phase {phase}"
        super().__init__(msg + (f": {reason}" if reason else ""))
        self.phase = phase
        self.structural = structural


class IllegalToken(EngineError):
    pass


class EmptyMask(EngineError):
    """No token is allowed in a constrained phase (inconsistent table)."""


class StructuralTokenError(EngineError):
    """A structural surface is not a single vocab piece."""


class StructuralToken(enum.Enum):
    S = ""
    DOT = "."
    LEFT_BRACKET = "("
    EQUAL = "="
    COMMA = ","
    RIGHT_BRACKET = ")"

    @property
    def surface(self) -> str:
        return self.value


QUOTE = '"'


class Phase(enum.Enum):
    PACKAGE_NAME = "package_name"
    FUNCTION_NAME = "function_name"
    ARG_NAME = "arg_name"
    ARG_VALUE_CLOSED = "arg_value_closed"
    ARG_VALUE_OPEN = "arg_value_open"
    VALUE_END = "value_end"
    DONE = "done"


class Verdict(enum.Enum):
    FINISH = "finish"
    FORCE_COMMA = "force_comma"


@dataclass(frozen=True)
class GenerationState:
    phase: Phase
    decoded_package: str | None = None
    decoded_function: str | None = None
    emitted_args: tuple[tuple[str, str], ...] = ()
    pending_arg: str | None = None
    trie_cursor: TrieNode | None = None
    unit: str = ""
    quote_open: bool = False
    after_left_bracket: bool = False

    @property
    def emitted_names(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.emitted_args)


def finalize_or_continue(state: GenerationState, table: ConstraintTable) -> Verdict:
    """Verdict for a proposed RIGHT_BRACKET: finish only when no required arg is missing."""
    spec = table.function(state.decoded_package, state.decoded_function)
    if spec.required_names <= state.emitted_names:
        return Verdict.FINISH
    return Verdict.FORCE_COMMA


def missing_required(state: GenerationState, table: ConstraintTable) -> frozenset[str]:
    spec = table.function(state.decoded_package, state.decoded_function)
    return spec.required_names - state.emitted_names


class ConstraintMachine:
    """Token-level constrained generation over one constraint table."""

    def __init__(self, table: ConstraintTable, vocab: Vocab, cache: TrieCache | None = None):
        self.table = table
        self.vocab = vocab
        self.cache = cache if cache is not None else TrieCache()
        ids = {}
        for surface in [t.surface for t in StructuralToken if t.surface] + [QUOTE]:
            if not vocab.has_piece(surface):
                raise StructuralTokenError(f"{surface!r} must be a single vocab piece")
            ids[surface] = vocab.id_of(surface)
        self.dot = ids["."]
        self.left_bracket = ids["("]
        self.equal = ids["="]
        self.comma = ids[","]
        self.right_bracket = ids[")"]
        self.quote = ids[QUOTE]
        self.open_value_ids = tuple(
            sorted(
                [i for i in range(UNK + 1, vocab.size) if QUOTE not in vocab.pieces[i]]
                + [self.quote]
            )
        )
        self._terminator = {
            Phase.PACKAGE_NAME: (self.dot, StructuralToken.DOT),
            Phase.FUNCTION_NAME: (self.left_bracket, StructuralToken.LEFT_BRACKET),
            Phase.ARG_NAME: (self.equal, StructuralToken.EQUAL),
        }

    # constraint retrieval ------------------------------------------------

    def trie(self, key, exclude: frozenset[str] = frozenset()) -> TokenTrie:
        def strings():
            return self.table.query(key) - exclude

        return self.cache.get((self.table.fingerprint, key, exclude), self.vocab, strings)

    def remaining_args(self, state: GenerationState) -> frozenset[str]:
        key = ArgsOf(state.decoded_package, state.decoded_function)
        return self.table.query(key) - state.emitted_names

    def _arg_name_state(self, state: GenerationState, **changes) -> GenerationState:
        key = ArgsOf(state.decoded_package, state.decoded_function)
        cursor = self.trie(key, state.emitted_names).root
        return replace(
            state, phase=Phase.ARG_NAME, trie_cursor=cursor, unit="", pending_arg=None, **changes
        )

    # structural transitions ----------------------------------------------

    def initial(self) -> GenerationState:
        return self.transition(None, StructuralToken.S)

    def transition(
        self, state: GenerationState | None, structural: StructuralToken
    ) -> GenerationState:
        phase = state.phase if state is not None else None
        if structural is StructuralToken.S:
            if state is not None:
                raise IllegalTransition(phase, structural)
            return GenerationState(Phase.PACKAGE_NAME, trie_cursor=self.trie(AllPackages()).root)
        if state is None:
            raise IllegalTransition(None, structural, "generation has not started")

        if structural is StructuralToken.DOT:
            if phase is not Phase.PACKAGE_NAME or not state.unit:
                raise IllegalTransition(phase, structural, "no package name decoded")
            if state.unit not in self.table.packages:
                raise IllegalTransition(phase, structural, f"unknown package {state.unit!r}")
            cursor = self.trie(FunctionsOf(state.unit)).root
            return replace(
                state,
                phase=Phase.FUNCTION_NAME,
                decoded_package=state.unit,
                trie_cursor=cursor,
                unit="",
            )

        if structural is StructuralToken.LEFT_BRACKET:
            if phase is not Phase.FUNCTION_NAME or not state.unit:
                raise IllegalTransition(phase, structural, "no function name decoded")
            try:
                self.table.function(state.decoded_package, state.unit)
            except UnknownKey as exc:
                raise IllegalTransition(phase, structural, str(exc)) from None
            return self._arg_name_state(
                replace(state, decoded_function=state.unit), after_left_bracket=True
            )

        if structural is StructuralToken.EQUAL:
            if phase is not Phase.ARG_NAME or not state.unit:
                raise IllegalTransition(phase, structural, "no argument name decoded")
            if state.unit not in self.remaining_args(state):
                raise IllegalTransition(phase, structural, f"argument {state.unit!r} not allowed")
            key = ValuesOf(state.decoded_package, state.decoded_function, state.unit)
            values = self.table.query(key)
            if values is OPEN:
                return replace(
                    state,
                    phase=Phase.ARG_VALUE_OPEN,
                    pending_arg=state.unit,
                    trie_cursor=None,
                    unit="",
                    quote_open=False,
                    after_left_bracket=False,
                )
            return replace(
                state,
                phase=Phase.ARG_VALUE_CLOSED,
                pending_arg=state.unit,
                trie_cursor=self.trie(key).root,
                unit="",
                quote_open=False,
                after_left_bracket=False,
            )

        if structural is StructuralToken.COMMA:
            if phase is not Phase.VALUE_END:
                raise IllegalTransition(phase, structural, "no argument value to close")
            if not self.remaining_args(state):
                raise IllegalTransition(phase, structural, "no arguments left")
            return self._arg_name_state(state, after_left_bracket=False)

        if structural is StructuralToken.RIGHT_BRACKET:
            empty_list = phase is Phase.ARG_NAME and state.after_left_bracket and not state.unit
            if phase is not Phase.VALUE_END and not empty_list:
                raise IllegalTransition(phase, structural)
            if finalize_or_continue(state, self.table) is Verdict.FINISH:
                return replace(
                    state, phase=Phase.DONE, trie_cursor=None, unit="", after_left_bracket=False
                )
            if empty_list:
                raise IllegalTransition(phase, structural, "required arguments missing")
            return self.transition(state, StructuralToken.COMMA)

        raise IllegalTransition(phase, structural)

    # token level ----------------------------------------------------------

    def allowed(self, state: GenerationState) -> tuple[int, ...]:
        """Sorted token ids that may follow ``state``.

        At the end of a value, RIGHT_BRACKET is only offered when it would
        finish the call; otherwise its probability is folded into COMMA.
        """
        phase = state.phase
        if phase in self._terminator:
            ids = set(state.trie_cursor.children)
            if state.trie_cursor.terminal:
                ids.add(self._terminator[phase][0])
            if (
                phase is Phase.ARG_NAME
                and state.after_left_bracket
                and not state.unit
                and finalize_or_continue(state, self.table) is Verdict.FINISH
            ):
                ids.add(self.right_bracket)
            return tuple(sorted(ids))
        if phase is Phase.ARG_VALUE_CLOSED:
            if not state.quote_open:
                return (self.quote,)
            ids = set(state.trie_cursor.children)
            if state.trie_cursor.terminal:
                ids.add(self.quote)
            return tuple(sorted(ids))
        if phase is Phase.ARG_VALUE_OPEN:
            return self.open_value_ids if state.quote_open else (self.quote,)
        if phase is Phase.VALUE_END:
            ids = set()
            if self.remaining_args(state):
                ids.add(self.comma)
            if finalize_or_continue(state, self.table) is Verdict.FINISH:
                ids.add(self.right_bracket)
            return tuple(sorted(ids))
        return ()

    def advance(self, state: GenerationState, tid: int) -> tuple[GenerationState, tuple | None]:
        """Apply one token; returns the new state and an optional unit event."""
        phase = state.phase
        piece = self.vocab.piece(tid)
        if phase in self._terminator:
            term_id, structural = self._terminator[phase]
            cursor = state.trie_cursor
            if tid == term_id and cursor.terminal:
                kind = {Phase.PACKAGE_NAME: "package", Phase.FUNCTION_NAME: "function"}.get(
                    phase, "arg"
                )
                return self.transition(state, structural), (kind, state.unit)
            if tid == self.right_bracket and phase is Phase.ARG_NAME and state.after_left_bracket:
                if not state.unit:
                    return self.transition(state, StructuralToken.RIGHT_BRACKET), ("done", None)
            child = cursor.children.get(tid)
            if child is None:
                raise IllegalToken(f"token {piece!r} not allowed in {phase.value}")
            return replace(state, trie_cursor=child, unit=state.unit + piece), None

        if phase in (Phase.ARG_VALUE_CLOSED, Phase.ARG_VALUE_OPEN):
            if not state.quote_open:
                if tid != self.quote:
                    raise IllegalToken(f"value must open with a quote, got {piece!r}")
                return replace(state, quote_open=True), None
            closed = phase is Phase.ARG_VALUE_CLOSED
            if tid == self.quote and (not closed or state.trie_cursor.terminal):
                done = replace(
                    state,
                    phase=Phase.VALUE_END,
                    emitted_args=state.emitted_args + ((state.pending_arg, state.unit),),
                    pending_arg=None,
                    trie_cursor=None,
                    unit="",
                    quote_open=False,
                )
                return done, ("value", (state.pending_arg, state.unit))
            if closed:
                child = state.trie_cursor.children.get(tid)
                if child is None:
                    raise IllegalToken(f"token {piece!r} not in value trie")
                return replace(state, trie_cursor=child, unit=state.unit + piece), None
            if tid not in self.open_value_ids or tid == self.quote:
                raise IllegalToken(f"token {piece!r} not allowed in an open value")
            return replace(state, unit=state.unit + piece), None

        if phase is Phase.VALUE_END:
            if tid == self.comma:
                event = None
                if finalize_or_continue(state, self.table) is Verdict.FORCE_COMMA:
                    event = ("force_comma", tuple(sorted(missing_required(state, self.table))))
                return self.transition(state, StructuralToken.COMMA), event
            if tid == self.right_bracket:
                nxt = self.transition(state, StructuralToken.RIGHT_BRACKET)
                if nxt.phase is not Phase.DONE:
                    raise IllegalToken("RIGHT_BRACKET with required arguments missing")
                return nxt, ("done", None)
            raise IllegalToken(f"expected ',' or ')' after a value, got {piece!r}")

        raise IllegalToken(f"no token may follow phase {phase.value}")


def transition(
    state: GenerationState | None,
    structural: StructuralToken,
    table: ConstraintTable,
    vocab: Vocab,
    cache: TrieCache | None = None,
) -> GenerationState:
    return ConstraintMachine(table, vocab, cache).transition(state, structural)
