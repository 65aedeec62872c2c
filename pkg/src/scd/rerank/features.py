"""Hand-built features of a (context, candidate call) pair for the linear scorer."""

from __future__ import annotations

import re
from functools import lru_cache

import numpy as np

from ..calls import try_parse, validate_call
from ..constraints import ConstraintError, ConstraintTable, extract_constraints
from ..context import PromptContext

FEATURE_NAMES = (
    "parses",
    "known_function",
    "required_complete",
    "values_in_closed_sets",
    "arg_count",
    "value_words_in_conversation",
    "mentioned_values_covered",
    "norm_logprob",
    "length",
)

_WORD = re.compile(r"[a-z0-9]+")


def _words(text: str) -> set[str]:
    return set(_WORD.findall(text.lower()))


@lru_cache(maxsize=4096)
def _table_for(doc: str | None) -> ConstraintTable:
    if not doc:
        return ConstraintTable({})
    try:
        return extract_constraints(doc)
    except ConstraintError:
        return ConstraintTable({})


def _mentioned(value: str, conversation_lower: str) -> bool:
    return re.search(rf"(?<![a-z0-9]){re.escape(value.lower())}(?![a-z0-9])", conversation_lower) is not None


def extract_features(
    context: PromptContext,
    candidate: str,
    norm_logprob: float = 0.0,
    table: ConstraintTable | None = None,
) -> np.ndarray:
    """Feature vector in :data:`FEATURE_NAMES` order.

    ``table`` defaults to the constraints extracted from ``context.api_doc``.
    """
    if table is None:
        table = _table_for(context.api_doc)
    conv = context.conversation_text
    conv_lower = conv.lower()
    conv_words = _words(conv)
    call = try_parse(candidate)

    problems = validate_call(candidate, table) if call is not None else ["parse"]
    parses = call is not None
    known = parses and "unknown_function" not in problems
    required = known and "missing_required" not in problems
    closed_ok = known and "bad_value" not in problems and "unknown_arg" not in problems

    values = [v for _, v in call.args] if call else []
    value_words = set().union(*(_words(v) for v in values)) if values else set()
    in_conv = len(value_words & conv_words) / len(value_words) if value_words else 0.0

    documented = {
        v
        for _, spec in table.functions()
        for a in spec.args
        for v in (a.possible_values or ())
    }
    mentioned = {v for v in documented if _mentioned(v, conv_lower)}
    covered = len(mentioned & set(values)) / len(mentioned) if mentioned else 1.0

    return np.array(
        [
            float(parses),
            float(known),
            float(required),
            float(closed_ok),
            float(len(values)),
            in_conv,
            covered,
            float(norm_logprob),
            len(candidate) / 100.0,
        ]
    )
