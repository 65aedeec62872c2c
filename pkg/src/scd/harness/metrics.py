from __future__ import annotations

from ..calls import try_parse


def exact_match(predicted: str, gold: str) -> bool:
    """Unit-wise order-insensitive match: same package, function and pair set."""
    p = try_parse(predicted)
    g = try_parse(gold)
    if p is None or g is None:
        return False
    return (p.package, p.function, p.pairs) == (g.package, g.function, g.pairs)
