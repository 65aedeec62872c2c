"""API-call surface grammar: ``Pkg.Fn(arg="value", ...)``.

Whitespace is allowed between units; values are double-quoted with no escape
sequences.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .constraints import ConstraintTable, UnknownKey

_NAME = r'[^\s.(),="]+'
_HEAD_RE = re.compile(rf"\s*({_NAME})\s*\.\s*({_NAME})\s*\(\s*")
_ARG_RE = re.compile(rf'({_NAME})\s*=\s*"([^"]*)"\s*')


class CallSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class ApiCall:
    package: str
    function: str
    args: tuple[tuple[str, str], ...] = ()

    @property
    def pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset(self.args)

    @property
    def arg_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.args)

    def render(self, sep: str = ",") -> str:
        body = sep.join(f'{n}="{v}"' for n, v in self.args)
        return f"{self.package}.{self.function}({body})"

    def __str__(self) -> str:
        return self.render(", ")


def parse_call(text: str) -> ApiCall:
    m = _HEAD_RE.match(text)
    if m is None:
        raise CallSyntaxError(f"not an API call: {text!r}")
    pos = m.end()
    args = []
    if text.startswith(")", pos):
        pos += 1
    else:
        while True:
            am = _ARG_RE.match(text, pos)
            if am is None:
                raise CallSyntaxError(f"bad argument at offset {pos} in {text!r}")
            args.append((am.group(1), am.group(2)))
            pos = am.end()
            if text.startswith(",", pos):
                pos += 1
                while pos < len(text) and text[pos].isspace():
                    pos += 1
                continue
            if text.startswith(")", pos):
                pos += 1
                break
            raise CallSyntaxError(f"expected ',' or ')' at offset {pos} in {text!r}")
    if text[pos:].strip():
        raise CallSyntaxError(f"trailing text after call: {text[pos:]!r}")
    return ApiCall(m.group(1), m.group(2), tuple(args))


def try_parse(text: str) -> ApiCall | None:
    try:
        return parse_call(text)
    except CallSyntaxError:
        return None


def validate_call(text: str, table: ConstraintTable) -> list[str]:
    """Faithfulness violations of ``text`` against ``table``; empty when faithful.

    Codes: ``parse``, ``unknown_function``, ``unknown_arg``, ``repeated_arg``,
    ``bad_value``, ``missing_required``.
    """
    call = try_parse(text)
    if call is None:
        return ["parse"]
    try:
        spec = table.function(call.package, call.function)
    except UnknownKey:
        return ["unknown_function"]
    problems = []
    names = call.arg_names
    if len(set(names)) != len(names):
        problems.append("repeated_arg")
    declared = {a.name: a for a in spec.args}
    for name, value in call.args:
        arg = declared.get(name)
        if arg is None:
            problems.append("unknown_arg")
        elif arg.possible_values is not None and value not in arg.possible_values:
            problems.append("bad_value")
    if not spec.required_names <= set(names):
        problems.append("missing_required")
    return problems
