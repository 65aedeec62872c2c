"""Constraint tables extracted from API documentation.

A :class:`ConstraintTable` answers four kinds of lookups: all package names,
the functions of a package, the arguments of a function, and the closed value
set of an argument (or :data:`OPEN` when the argument is free-form).

Two documentation syntaxes are accepted:

``canonical``
    Free text containing declaration lines such as::

        Restaurants_1.FindRestaurants("cuisine" : Required, "city" : Optional)
        the possible values for "cuisine" include ["Mexican", "Chinese"]

    A value line attaches to the nearest preceding function that declares
    the argument. Anything that does not look like a declaration is ignored.

``json``
    ``{"packages": {pkg: {fn: {"args": [{"name", "required", "values"}]}}}}``
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

STRUCTURAL_CHARS = frozenset('.(),="')


class ConstraintError(Exception):
    pass


class MalformedDoc(ConstraintError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class UnknownKey(ConstraintError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class DuplicateDeclarationWarning(UserWarning):
    pass


class Requirement(str, enum.Enum):
    REQUIRED = "Required"
    OPTIONAL = "Optional"


class DocSyntax(str, enum.Enum):
    CANONICAL = "canonical"
    JSON = "json"


class _Open:
    """Marker for an argument without a closed value set."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OPEN"

    def __reduce__(self):
        return (_Open, ())


OPEN = _Open()


def valid_name(name: str) -> bool:
    return bool(name) and not any(c in STRUCTURAL_CHARS or c.isspace() for c in name)


@dataclass(frozen=True)
class ArgSpec:
    name: str
    requirement: Requirement
    possible_values: tuple[str, ...] | None = None

    def __post_init__(self):
        if not valid_name(self.name):
            raise ValueError(f"invalid argument name {self.name!r}")
        if self.possible_values is not None:
            if not self.possible_values:
                raise ValueError(f"empty value set for {self.name!r}")
            if len(set(self.possible_values)) != len(self.possible_values):
                raise ValueError(f"duplicate values for {self.name!r}")
            if any('"' in v for v in self.possible_values):
                raise ValueError(f"value for {self.name!r} contains a double quote")

    @property
    def required(self) -> bool:
        return self.requirement is Requirement.REQUIRED


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    args: tuple[ArgSpec, ...] = ()

    def __post_init__(self):
        if not valid_name(self.name):
            raise ValueError(f"invalid function name {self.name!r}")
        names = [a.name for a in self.args]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate argument names in {self.name!r}")

    def arg(self, name: str) -> ArgSpec:
        for a in self.args:
            if a.name == name:
                return a
        raise UnknownKey(f"unknown argument {name!r} of {self.name!r}")

    @property
    def arg_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.args)

    @property
    def required_names(self) -> frozenset[str]:
        return frozenset(a.name for a in self.args if a.required)


# Query keys ---------------------------------------------------------------


@dataclass(frozen=True)
class AllPackages:
    pass


@dataclass(frozen=True)
class FunctionsOf:
    package: str


@dataclass(frozen=True)
class ArgsOf:
    package: str
    function: str


@dataclass(frozen=True)
class ValuesOf:
    package: str
    function: str
    arg: str


QueryKey = Union[AllPackages, FunctionsOf, ArgsOf, ValuesOf]


@dataclass(frozen=True, eq=True)
class ConstraintTable:
    """Immutable package -> function -> FunctionSpec lookup."""

    packages: Mapping[str, Mapping[str, FunctionSpec]] = field(default_factory=dict)

    def __post_init__(self):
        for pkg, fns in self.packages.items():
            if not valid_name(pkg):
                raise ValueError(f"invalid package name {pkg!r}")
            for fname, spec in fns.items():
                if fname != spec.name:
                    raise ValueError(f"function key {fname!r} != spec name {spec.name!r}")

    __hash__ = None  # type: ignore[assignment]

    def __bool__(self) -> bool:
        return bool(self.packages)

    def function(self, package: str, function: str) -> FunctionSpec:
        try:
            fns = self.packages[package]
        except KeyError:
            raise UnknownKey(f"unknown package {package!r}") from None
        try:
            return fns[function]
        except KeyError:
            raise UnknownKey(f"unknown function {package}.{function}") from None

    def query(self, key: QueryKey) -> frozenset[str] | _Open:
        if isinstance(key, AllPackages):
            return frozenset(self.packages)
        if isinstance(key, FunctionsOf):
            if key.package not in self.packages:
                raise UnknownKey(f"unknown package {key.package!r}")
            return frozenset(self.packages[key.package])
        if isinstance(key, ArgsOf):
            return frozenset(self.function(key.package, key.function).arg_names)
        if isinstance(key, ValuesOf):
            spec = self.function(key.package, key.function).arg(key.arg)
            if spec.possible_values is None:
                return OPEN
            return frozenset(spec.possible_values)
        raise TypeError(f"not a query key: {key!r}")

    def functions(self) -> Iterable[tuple[str, FunctionSpec]]:
        for pkg, fns in self.packages.items():
            for spec in fns.values():
                yield pkg, spec

    def to_json_obj(self) -> dict:
        return {
            "packages": {
                pkg: {
                    fname: {
                        "args": [
                            {
                                "name": a.name,
                                "required": a.required,
                                "values": list(a.possible_values)
                                if a.possible_values is not None
                                else None,
                            }
                            for a in spec.args
                        ]
                    }
                    for fname, spec in fns.items()
                }
                for pkg, fns in self.packages.items()
            }
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_obj(), **kwargs)

    @cached_property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def to_doc(self) -> str:
        """Serialize into canonical documentation syntax."""
        lines = []
        for pkg, spec in self.functions():
            body = ", ".join(f'"{a.name}" : {a.requirement.value}' for a in spec.args)
            lines.append(f"{pkg}.{spec.name}({body})")
            for a in spec.args:
                if a.possible_values is not None:
                    vals = ", ".join(f'"{v}"' for v in a.possible_values)
                    lines.append(f'the possible values for "{a.name}" include [{vals}]')
        return "\n".join(lines) + ("\n" if lines else "")


def query(table: ConstraintTable, key: QueryKey) -> frozenset[str] | _Open:
    return table.query(key)


# Extraction ---------------------------------------------------------------

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_DECL_RE = re.compile(rf"(?P<pkg>{_IDENT})\.(?P<fn>{_IDENT})\((?P<body>[^()]*)\)")
_DECL_BODY_HINT = re.compile(r'^\s*"[^"]*"\s*:')
_ARG_RE = re.compile(r'\s*"(?P<name>[^"]*)"\s*:\s*(?P<req>Required|Optional)\s*')
_VALUES_PHRASE = re.compile(r"the\s+possible\s+values\s+for\b", re.IGNORECASE)
_VALUES_RE = re.compile(
    r'the\s+possible\s+values\s+for\s+"(?P<arg>[^"]*)"\s+include\s*\[(?P<list>[^\]]*)\]',
    re.IGNORECASE,
)
_LIST_RE = re.compile(r'\s*"[^"]*"(?:\s*,\s*"[^"]*")*\s*')
_QUOTED = re.compile(r'"([^"]*)"')


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _parse_decl_body(body: str, line: int) -> list[tuple[str, Requirement]]:
    if not body.strip():
        return []
    out = []
    for piece in body.split(","):
        m = _ARG_RE.fullmatch(piece)
        if m is None:
            raise MalformedDoc(line, f"bad argument declaration {piece.strip()!r}")
        name = m.group("name")
        if not valid_name(name):
            raise MalformedDoc(line, f"invalid argument name {name!r}")
        out.append((name, Requirement(m.group("req"))))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise MalformedDoc(line, "argument declared twice")
    return out


def _extract_canonical(text: str) -> ConstraintTable:
    events = []
    for m in _DECL_RE.finditer(text):
        if m.group("body").strip() and not _DECL_BODY_HINT.match(m.group("body")):
            continue  # prose or an example call, not a declaration
        events.append((m.start(), "decl", m))
    full_values = {m.start(): m for m in _VALUES_RE.finditer(text)}
    for m in _VALUES_PHRASE.finditer(text):
        vm = full_values.get(m.start())
        if vm is None:
            raise MalformedDoc(_line_of(text, m.start()), "unparseable possible-values line")
        events.append((m.start(), "values", vm))
    events.sort(key=lambda e: e[0])

    # (pkg, fn) -> [[name, requirement, values], ...]
    building: dict[tuple[str, str], list[list]] = {}
    order: list[tuple[str, str]] = []
    for pos, kind, m in events:
        line = _line_of(text, pos)
        if kind == "decl":
            key = (m.group("pkg"), m.group("fn"))
            args = _parse_decl_body(m.group("body"), line)
            if key in building:
                warnings.warn(
                    f"line {line}: {key[0]}.{key[1]} redeclared; last declaration wins",
                    DuplicateDeclarationWarning,
                    stacklevel=3,
                )
                order.remove(key)
            building[key] = [[n, r, None] for n, r in args]
            order.append(key)
            continue
        arg = m.group("arg")
        listing = m.group("list")
        if _LIST_RE.fullmatch(listing) is None:
            raise MalformedDoc(line, f"bad value list for {arg!r}")
        values = list(dict.fromkeys(_QUOTED.findall(listing)))
        for key in reversed(order):
            slot = next((a for a in building[key] if a[0] == arg), None)
            if slot is not None:
                slot[2] = tuple(values)
                break
        else:
            raise MalformedDoc(line, f"possible values for undeclared argument {arg!r}")

    packages: dict[str, dict[str, FunctionSpec]] = {}
    for pkg, fn in order:
        args = tuple(ArgSpec(n, r, v) for n, r, v in building[(pkg, fn)])
        packages.setdefault(pkg, {})[fn] = FunctionSpec(fn, args)
    return ConstraintTable(packages)


def table_from_json_obj(obj: Mapping) -> ConstraintTable:
    try:
        raw = obj["packages"]
        packages: dict[str, dict[str, FunctionSpec]] = {}
        for pkg, fns in raw.items():
            packages[pkg] = {}
            for fname, fspec in fns.items():
                args = []
                for a in fspec.get("args", []):
                    values = a.get("values")
                    args.append(
                        ArgSpec(
                            a["name"],
                            Requirement.REQUIRED if a["required"] else Requirement.OPTIONAL,
                            tuple(values) if values is not None else None,
                        )
                    )
                packages[pkg][fname] = FunctionSpec(fname, tuple(args))
        return ConstraintTable(packages)
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise MalformedDoc(1, f"bad JSON constraint table: {exc}") from exc


def extract_constraints(
    doc_text: str, syntax: DocSyntax | str = DocSyntax.CANONICAL
) -> ConstraintTable:
    """Parse documentation into a :class:`ConstraintTable`.

    Raises:
        MalformedDoc: a declaration or value line is only partially valid.
    """
    syntax = DocSyntax(syntax)
    if syntax is DocSyntax.JSON:
        if not doc_text.strip():
            return ConstraintTable({})
        try:
            obj = json.loads(doc_text)
        except json.JSONDecodeError as exc:
            raise MalformedDoc(exc.lineno, exc.msg) from exc
        return table_from_json_obj(obj)
    return _extract_canonical(doc_text)
