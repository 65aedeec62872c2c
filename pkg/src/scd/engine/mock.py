"""Deterministic mock language models for testing and desk-scale experiments."""

from __future__ import annotations

import json
import math
import zlib
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..context import PromptContext, conversation_key
from ..tokenizer import EOS, UNK, Vocab


class UniformLM:
    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def next_logits(self, prefix, context) -> np.ndarray:
        return np.full(self.vocab_size, -math.log(self.vocab_size))


class RandomLM:
    """Pseudo-random logits, a pure function of ``(seed, prefix)``.

    ``bias`` is added to every logit vector; use it to make some tokens
    (a closing quote, say) likelier everywhere.
    """

    def __init__(
        self,
        vocab_size: int,
        seed: int = 0,
        scale: float = 2.0,
        bias: Mapping[int, float] | None = None,
        use_context: bool = False,
    ):
        self.vocab_size = vocab_size
        self.seed = seed
        self.scale = scale
        self.use_context = use_context
        self.bias = np.zeros(vocab_size)
        for tid, b in (bias or {}).items():
            self.bias[tid] = b

    def next_logits(self, prefix, context) -> np.ndarray:
        entropy = [self.seed, len(prefix), *map(int, prefix)]
        if self.use_context and context is not None:
            entropy.append(zlib.crc32(context.render().encode("utf-8")))
        rng = np.random.default_rng(entropy)
        return rng.normal(0.0, self.scale, self.vocab_size) + self.bias


Components = Sequence[tuple[str, float]]


class MixtureLM:
    """LM that continues a weighted set of target strings.

    Each component ``(text, weight)`` whose text extends the decoded prefix
    votes for every vocab piece that continues it, preferring longer pieces
    by ``exp(length_bias * len(piece))``; a component that is complete votes
    for EOS. A component that no longer extends the prefix backs off: it
    continues after every occurrence of the longest suffix of the prefix
    found in its text, with weight scaled by ``backoff``. A ``floor`` share
    of the mass is spread uniformly so every token keeps non-zero
    probability. Matching is on decoded text, so a target can be followed
    under any tokenization.
    """

    def __init__(
        self,
        vocab: Vocab,
        components: Components = (),
        floor: float = 1e-3,
        length_bias: float = 2.0,
        backoff: float = 0.05,
    ):
        self.vocab = vocab
        self.components = tuple((str(s), float(w)) for s, w in components)
        self.floor = floor
        self.length_bias = length_bias
        self.backoff = backoff
        self._max_len = max((len(p) for p in vocab.pieces[UNK + 1:]), default=1)

    def components_for(self, context: PromptContext | None) -> Components:
        return self.components

    def _vote(self, mass: np.ndarray, rest: str, weight: float) -> None:
        if not rest:
            mass[EOS] += weight
            return
        ids, scores = [], []
        for length in range(1, min(self._max_len, len(rest)) + 1):
            piece = rest[:length]
            if self.vocab.has_piece(piece):
                ids.append(self.vocab.id_of(piece))
                scores.append(self.length_bias * length)
        if ids:
            s = np.exp(np.asarray(scores) - max(scores))
            mass[ids] += weight * s / s.sum()

    def next_logits(self, prefix, context) -> np.ndarray:
        return self._logits(self.vocab.decode(prefix), self.components_for(context))

    def _logits(self, text: str, components: Components) -> np.ndarray:
        vocab = self.vocab
        size = vocab.size
        mass = np.zeros(size)
        for target, weight in components:
            if weight <= 0:
                continue
            if target.startswith(text):
                self._vote(mass, target[len(text):], weight)
            elif self.backoff > 0:
                rests = _continuations(text, target)
                for rest in rests:
                    self._vote(mass, rest, weight * self.backoff / len(rests))
        total = mass.sum()
        probs = np.full(size, 1.0 / size)
        if total > 0:
            probs = self.floor * probs + (1.0 - self.floor) * mass / total
        return np.log(probs)


def _continuations(text: str, target: str) -> list[str]:
    """Text following each occurrence of the longest suffix of ``text`` in ``target``."""
    for k in range(min(len(text), len(target)), 0, -1):
        suffix = text[-k:]
        starts = []
        i = target.find(suffix)
        while i >= 0:
            starts.append(i + k)
            i = target.find(suffix, i + 1)
        if starts:
            return [target[j:] for j in starts]
    return []


class ContextualMixtureLM(MixtureLM):
    """MixtureLM whose components depend on the conversation and on doc presence.

    ``entries`` maps :func:`conversation_key` to ``{"with_doc": [...],
    "without_doc": [...]}``; a missing ``without_doc`` list falls back to
    ``with_doc``. Unknown conversations use ``default``.
    """

    def __init__(
        self,
        vocab: Vocab,
        entries: Mapping[str, Mapping[str, Components]],
        default: Components = (),
        floor: float = 1e-3,
        length_bias: float = 2.0,
        backoff: float = 0.05,
    ):
        super().__init__(vocab, default, floor, length_bias, backoff)
        self.entries = {
            k: {mode: tuple((str(s), float(w)) for s, w in comps) for mode, comps in v.items()}
            for k, v in entries.items()
        }

    def components_for(self, context: PromptContext | None) -> Components:
        if context is None:
            return self.components
        entry = self.entries.get(conversation_key(context))
        if entry is None:
            return self.components
        if context.api_doc:
            return entry.get("with_doc", ())
        return entry.get("without_doc", entry.get("with_doc", ()))


def build_mock_lm(spec: Mapping, vocab: Vocab):
    """Construct a mock LM from a JSON-style spec.

    ``{"type": "uniform"}``, ``{"type": "random", "seed", "scale", "bias"}``,
    ``{"type": "mixture", "components": [[text, w], ...]}`` or
    ``{"type": "contextual", "entries": {...}, "default": [...]}``; mixture
    types accept ``floor``, ``length_bias`` and ``backoff``.
    """
    kind = spec.get("type", "contextual")
    if kind == "uniform":
        return UniformLM(vocab.size)
    if kind == "random":
        bias = {}
        for key, b in (spec.get("bias") or {}).items():
            bias[vocab.id_of(key) if not str(key).isdigit() else int(key)] = float(b)
        return RandomLM(vocab.size, int(spec.get("seed", 0)), float(spec.get("scale", 2.0)), bias)
    opts = {
        "floor": float(spec.get("floor", 1e-3)),
        "length_bias": float(spec.get("length_bias", 2.0)),
        "backoff": float(spec.get("backoff", 0.05)),
    }
    if kind == "mixture":
        return MixtureLM(vocab, spec.get("components", ()), **opts)
    if kind == "contextual":
        return ContextualMixtureLM(vocab, spec.get("entries", {}), spec.get("default", ()), **opts)
    raise ValueError(f"unknown mock LM type {kind!r}")


def load_mock_spec(path: str | Path) -> tuple[dict, Vocab]:
    """Read a mock spec file; ``vocab`` is a path relative to the spec or an inline piece list."""
    path = Path(path)
    spec = json.loads(path.read_text(encoding="utf-8"))
    vocab_ref = spec.get("vocab")
    if isinstance(vocab_ref, list):
        vocab = Vocab(tuple(vocab_ref))
    elif isinstance(vocab_ref, str):
        vocab = Vocab.load(path.parent / vocab_ref)
    else:
        raise ValueError("mock spec needs a 'vocab' path or piece list")
    return spec, vocab
