from __future__ import annotations

from ..calls import try_parse


def match_score(candidate: str, gold: str) -> float:
    """Smoothed overlap of argument-value pairs, zero unless the function matches.

    ``(|C & G| + 1) / (|C | G| + 1)`` over argument-value pair sets; 1.0
    exactly when the two calls are equal as unordered sets. Unparseable
    input scores 0.
    """
    c = try_parse(candidate)
    g = try_parse(gold)
    if c is None or g is None:
        return 0.0
    if (c.package, c.function) != (g.package, g.function):
        return 0.0
    cp, gp = c.pairs, g.pairs
    return (len(cp & gp) + 1) / (len(cp | gp) + 1)
