"""Synthetic tables, vocabularies, mock LMs and datasets.

``random_trial`` draws the small random instances used by the property
checks. ``rerank_suite`` and ``doc_dependent_suite`` build restaurant-style
datasets together with a conversation-keyed mock LM, so the reranking and
documentation-removal experiments can run without a real model.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..calls import ApiCall
from ..constraints import ArgSpec, ConstraintTable, FunctionSpec, Requirement
from ..context import conversation_key
from ..engine.decoder import DecodeConfig, Strategy
from ..engine.mock import MixtureLM, RandomLM, UniformLM, build_mock_lm
from ..tokenizer import Vocab
from .dataset import Sample, save_dataset

STRUCTURAL_PIECES = (".", "(", "=", ",", ")", '"')
_LETTERS = tuple("abcdefghijklmnopqrstuvwxyz")


def build_vocab(strings: Sequence[str], extra: Sequence[str] = ()) -> Vocab:
    """Every character of ``strings`` plus the structural pieces, a space and ``extra``."""
    chars = {c for s in strings for c in s if c not in "\r\n"}
    chars |= set(STRUCTURAL_PIECES) | {" "}
    return Vocab.from_pieces(list(extra) + sorted(chars))


# Random trials -----------------------------------------------------------


def _fresh(rng: np.random.Generator, alphabet: Sequence[str], used: set, lo: int, hi: int) -> str:
    for _ in range(1000):
        s = "".join(rng.choice(list(alphabet), size=int(rng.integers(lo, hi + 1))))
        if s not in used and s.strip() == s:
            used.add(s)
            return s
    raise RuntimeError("name space exhausted")


def random_table(
    rng: np.random.Generator,
    letters: Sequence[str],
    max_packages: int = 4,
    max_functions: int = 4,
    max_args: int = 5,
    max_values: int = 6,
    open_prob: float = 0.3,
    required_prob: float = 0.5,
) -> ConstraintTable:
    packages = {}
    used_pkg: set = set()
    for _ in range(int(rng.integers(1, max_packages + 1))):
        pkg = _fresh(rng, letters, used_pkg, 1, 4)
        fns = {}
        used_fn: set = set()
        for _ in range(int(rng.integers(1, max_functions + 1))):
            fn = _fresh(rng, letters, used_fn, 1, 4)
            args = []
            used_arg: set = set()
            for _ in range(int(rng.integers(0, max_args + 1))):
                name = _fresh(rng, letters, used_arg, 1, 4)
                req = Requirement.REQUIRED if rng.random() < required_prob else Requirement.OPTIONAL
                values = None
                if rng.random() >= open_prob:
                    used_v: set = set()
                    n = int(rng.integers(1, max_values + 1))
                    values = tuple(_fresh(rng, list(letters) + [" "], used_v, 1, 5) for _ in range(n))
                args.append(ArgSpec(name, req, values))
            fns[fn] = FunctionSpec(fn, tuple(args))
        packages[pkg] = fns
    return ConstraintTable(packages)


def table_strings(table: ConstraintTable) -> list[str]:
    out = list(table.packages)
    for _, spec in table.functions():
        out.append(spec.name)
        for a in spec.args:
            out.append(a.name)
            out.extend(a.possible_values or ())
    return out


def random_vocab(rng: np.random.Generator, table: ConstraintTable, letters: Sequence[str], max_size: int = 64) -> Vocab:
    base = build_vocab(list(letters))
    room = max_size - base.size
    strings = table_strings(table)
    multi: list[str] = []
    for s in strings:
        for length in (2, 3, 4):
            for i in range(len(s) - length + 1):
                multi.append(s[i : i + length])
    multi = sorted(set(p for p in multi if p not in base.pieces))
    if room > 0 and multi:
        pick = rng.choice(len(multi), size=min(room, len(multi), int(rng.integers(0, room + 1))), replace=False)
        chosen = [multi[i] for i in sorted(pick)]
    else:
        chosen = []
    return Vocab(base.pieces + tuple(chosen))


def random_call(rng: np.random.Generator, table: ConstraintTable, letters: Sequence[str]) -> ApiCall:
    fns = list(table.functions())
    pkg, spec = fns[int(rng.integers(len(fns)))]
    args = [a for a in spec.args if a.required or rng.random() < 0.5]
    rng.shuffle(args)
    pairs = []
    for a in args:
        if a.possible_values is None:
            value = _fresh(rng, letters, set(), 1, 5)
        else:
            value = a.possible_values[int(rng.integers(len(a.possible_values)))]
        pairs.append((a.name, value))
    return ApiCall(pkg, spec.name, tuple(pairs))


def random_lm(rng: np.random.Generator, table: ConstraintTable, vocab: Vocab, letters: Sequence[str]):
    kind = int(rng.integers(4))
    quote = vocab.id_of('"')
    if kind == 0:
        if all(a.possible_values is not None for _, spec in table.functions() for a in spec.args):
            return UniformLM(vocab.size)
        # flat logits never pick the quote under greedy ties, so open values would never close
        return RandomLM(vocab.size, 0, 0.0, {quote: 1.0})
    if kind == 1:
        # the quote bias keeps open values from running for hundreds of tokens
        return RandomLM(vocab.size, int(rng.integers(2**31)), float(rng.uniform(0.5, 4.0)), {quote: 2.5})
    components = []
    for _ in range(int(rng.integers(1, 5))):
        if kind == 2 or rng.random() < 0.5:
            text = random_call(rng, table, letters).render()
        else:
            text = "".join(rng.choice(list(vocab.pieces[3:]), size=int(rng.integers(3, 20))))
        components.append((text, float(rng.uniform(0.1, 3.0))))
    return MixtureLM(vocab, components, floor=float(rng.uniform(1e-3, 0.2)), backoff=float(rng.uniform(0.0, 0.2)))


@dataclass
class Trial:
    seed: int
    table: ConstraintTable
    vocab: Vocab
    lm: object
    cfg: DecodeConfig
    letters: tuple[str, ...] = field(default=())


def random_trial(seed: int, strategy: Strategy | str | None = None, max_tokens: int = 512) -> Trial:
    """One random (table, vocab, LM, config) instance within the trial size limits."""
    rng = np.random.default_rng(seed)
    letters = tuple(rng.choice(_LETTERS, size=int(rng.integers(3, 7)), replace=False))
    table = random_table(rng, letters)
    vocab = random_vocab(rng, table, letters)
    lm = random_lm(rng, table, vocab, letters)
    strategy = Strategy(strategy) if strategy is not None else list(Strategy)[seed % 4]
    temperature = 0.0 if strategy in (Strategy.GREEDY, Strategy.BEAM) else float(rng.uniform(0.5, 1.5))
    cfg = DecodeConfig(
        strategy=strategy,
        beam_size=int(rng.integers(1, 5)),
        k=int(rng.integers(1, 6)),
        p=float(rng.uniform(0.3, 1.0)),
        temperature=temperature,
        max_tokens=max_tokens,
        seed=int(rng.integers(2**31)),
    )
    return Trial(seed, table, vocab, lm, cfg, letters)


# Restaurant-style suites ---------------------------------------------------

DOMAINS = {
    "Restaurants_1": (
        "FindRestaurants",
        (
            ("cuisine", True, ("Mexican", "Chinese", "Indian", "American", "Italian", "Thai")),
            ("city", True, None),
            ("price_range", False, ("cheap", "moderate", "pricey")),
        ),
    ),
    "Hotels_2": (
        "SearchHouse",
        (
            ("where_to", True, None),
            ("number_of_adults", False, ("1", "2", "3", "4")),
            ("rating", False, ("good", "great", "excellent")),
        ),
    ),
    "Movies_1": (
        "FindMovies",
        (
            ("location", True, None),
            ("genre", True, ("Comedy", "Drama", "Horror", "Action", "Fantasy")),
            ("show_type", False, ("regular", "imax")),
        ),
    ),
    "Events_1": (
        "FindEvents",
        (
            ("category", True, ("Music", "Sports", "Theater")),
            ("city_of_event", True, None),
            ("subcategory", False, ("Rock", "Pop", "Jazz", "Football", "Baseball")),
        ),
    ),
}

CITIES = ("Mountain View", "San Jose", "Oakland", "Berkeley", "Palo Alto", "Fremont", "Sunnyvale", "Napa")

# made-up names an LM might guess without documentation
_HALLUCINATED = {
    "Restaurants_1": ("Restaurant", "Search", {"cuisine": "food", "city": "location", "price_range": "price"}),
    "Hotels_2": ("Hotel", "FindHotel", {"where_to": "city", "number_of_adults": "guests", "rating": "stars"}),
    "Movies_1": ("Movie", "Search", {"location": "city", "genre": "type", "show_type": "format"}),
    "Events_1": ("Event", "Search", {"category": "kind", "city_of_event": "city", "subcategory": "style"}),
}

_PHRASES = {
    "cuisine": "I am craving {} food",
    "city": "somewhere in {}",
    "price_range": "and I want it {}",
    "where_to": "I need a place to stay in {}",
    "number_of_adults": "for {} people",
    "rating": "with a {} rating",
    "location": "I want to see a movie in {}",
    "genre": "a {} one",
    "show_type": "shown in {}",
    "category": "looking for {} events",
    "city_of_event": "happening in {}",
    "subcategory": "preferably {}",
}

_OPENERS = ("Hi.", "Hello there.", "Hey.", "Good evening.", "Can you help me?", "Quick question.")
_REPLIES = ("Sure, what do you need?", "Of course. Tell me more.", "Happy to help.")


def domain_table(names: Sequence[str]) -> ConstraintTable:
    packages = {}
    for pkg in names:
        fn, args = DOMAINS[pkg]
        specs = tuple(
            ArgSpec(a, Requirement.REQUIRED if req else Requirement.OPTIONAL, vals) for a, req, vals in args
        )
        packages[pkg] = {fn: FunctionSpec(fn, specs)}
    return ConstraintTable(packages)


def render_doc(table: ConstraintTable) -> str:
    return "Short-listed APIs and their arguments:\n" + table.to_doc()


def _value_for(rng, arg_values, exclude=()):
    pool = arg_values if arg_values is not None else CITIES
    pool = [v for v in pool if v not in exclude]
    return pool[int(rng.integers(len(pool)))]


def _gold_for(rng, pkg: str) -> ApiCall:
    fn, args = DOMAINS[pkg]
    pairs = []
    for name, req, vals in args:
        if req or rng.random() < 0.6:
            pairs.append((name, _value_for(rng, vals)))
    return ApiCall(pkg, fn, tuple(pairs))


def _conversation(rng, gold: ApiCall) -> tuple[tuple[str, str], ...]:
    clauses = [_PHRASES[name].format(value) for name, value in gold.args]
    opener = _OPENERS[int(rng.integers(len(_OPENERS)))]
    reply = _REPLIES[int(rng.integers(len(_REPLIES)))]
    return (("Human", opener), ("Assistant", reply), ("Human", ", ".join(clauses) + "."))


def _distractors(rng, gold: ApiCall) -> list[ApiCall]:
    """Near misses the conversation can tell apart from the gold call."""
    fn, args = DOMAINS[gold.package]
    vals = {name: v for name, _, v in args}
    used = {v for _, v in gold.args}
    out = []
    for i, (name, value) in enumerate(gold.args):
        swapped = list(gold.args)
        swapped[i] = (name, _value_for(rng, vals[name], exclude=used))
        out.append(ApiCall(gold.package, gold.function, tuple(swapped)))
    optional = [i for i, (name, _) in enumerate(gold.args) if not dict((a, r) for a, r, _ in args)[name]]
    for i in optional:
        out.append(ApiCall(gold.package, gold.function, gold.args[:i] + gold.args[i + 1 :]))
    order = rng.permutation(len(out))
    return [out[i] for i in order[: int(rng.integers(2, 4))]]


@dataclass
class Suite:
    samples: list[Sample]
    vocab: Vocab
    lm_spec: dict
    gold_class: dict[str, str] = field(default_factory=dict)

    def lm(self):
        return build_mock_lm(self.lm_spec, self.vocab)

    def mock_spec(self) -> dict:
        return {"vocab": list(self.vocab.pieces), "lm": self.lm_spec}

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        data, spec = out / "dataset.jsonl", out / "mock.json"
        save_dataset(self.samples, data)
        spec.write_text(json.dumps(self.mock_spec(), indent=1, sort_keys=True), encoding="utf-8")
        return data, spec


def _suite_vocab(strings: Sequence[str]) -> Vocab:
    words = sorted({w for s in strings for w in re.findall(r"[A-Za-z]{2,}", s)})
    # whole words plus three-letter stems, so names take a few pieces each
    extra = sorted(set(words) | {w[:3] for w in words if len(w) > 3})
    return build_vocab(strings, extra)


def _shortlist(rng, pkg: str) -> list[str]:
    others = [p for p in DOMAINS if p != pkg]
    extra = [others[i] for i in rng.choice(len(others), size=int(rng.integers(1, 3)), replace=False)]
    return sorted([pkg] + extra)


def _unique_samples(rng, n: int, prefix: str):
    seen = set()
    pkgs = sorted(DOMAINS)
    while len(seen) < n:
        pkg = pkgs[int(rng.integers(len(pkgs)))]
        gold = _gold_for(rng, pkg)
        conv = _conversation(rng, gold)
        key = json.dumps(conv)
        if key in seen:
            continue
        seen.add(key)
        table = domain_table(_shortlist(rng, pkg))
        yield Sample(f"{prefix}{len(seen) - 1:04d}", conv, render_doc(table), gold.render()), gold


def rerank_suite(n: int = 120, seed: int = 0, p_top: float = 0.4, p_out: float = 0.1) -> Suite:
    """Samples whose gold call lands at rank 1, lower in the beam, or nowhere.

    Each sample's LM mixes the gold call with near misses. A ``p_top`` share
    gives the gold the largest weight, a ``p_out`` share drops it, and the
    rest give some near miss a larger weight than the gold.
    A dropped gold can still surface in the beam through the floor mass.
    """
    rng = np.random.default_rng(seed)
    samples, entries, classes, strings = [], {}, {}, []
    for sample, gold in _unique_samples(rng, n, f"r{seed}-"):
        near = _distractors(rng, gold)
        u = rng.random()
        if u < p_top:
            cls = "top"
            comps = [(gold.render(), 3.0)] + [(d.render(), float(rng.uniform(0.5, 1.2))) for d in near]
        elif u < p_top + p_out:
            cls = "out"
            comps = [(d.render(), float(rng.uniform(0.5, 2.0))) for d in near]
        else:
            cls = "below"
            comps = [(gold.render(), 1.0)] + [(d.render(), float(rng.uniform(1.6, 3.0))) for d in near[:1]]
            comps += [(d.render(), float(rng.uniform(0.3, 1.0))) for d in near[1:]]
        entries[conversation_key(sample.context())] = {"with_doc": comps}
        classes[sample.id] = cls
        samples.append(sample)
        strings += [c for c, _ in comps] + [sample.api_doc]
    spec = {"type": "contextual", "entries": entries, "default": [], "floor": 1e-3}
    return Suite(samples, _suite_vocab(strings), spec, classes)


def hallucinate(gold: ApiCall) -> ApiCall:
    pkg, fn, rename = _HALLUCINATED[gold.package]
    return ApiCall(pkg, fn, tuple((rename[a], v) for a, v in gold.args))


def doc_dependent_suite(n: int = 60, seed: int = 0) -> Suite:
    """An LM that knows the documented names only when the doc is in the prompt.

    With the doc it continues the gold call. Without it, it mostly continues
    a call with made-up package, function and argument names.
    """
    rng = np.random.default_rng(seed)
    samples, entries, strings = [], {}, []
    for sample, gold in _unique_samples(rng, n, f"d{seed}-"):
        fake = hallucinate(gold)
        entries[conversation_key(sample.context())] = {
            "with_doc": [(gold.render(), 1.0)],
            "without_doc": [(fake.render(), 4.0), (gold.render(), 1.0)],
        }
        samples.append(sample)
        strings += [gold.render(), fake.render(), sample.api_doc]
    spec = {"type": "contextual", "entries": entries, "default": [], "floor": 1e-3}
    return Suite(samples, _suite_vocab(strings), spec)
