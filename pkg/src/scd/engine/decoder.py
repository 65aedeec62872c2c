"""Constrained and regular decoding: greedy, top-k, top-p and beam search."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from ..constraints import ConstraintTable
from ..context import PromptContext
from ..tokenizer import BOS, EOS, UNK, Vocab
from ..trie import TrieCache
from .lm import LMProvider, ProtocolError
from .state import ConstraintMachine, EmptyMask, EngineError, GenerationState, Phase


class MaxTokensExceeded(EngineError):
    def __init__(self, partial: "Hypothesis"):
        super().__init__(f"max_tokens reached after {len(partial.tokens)} tokens")
        self.partial = partial


class Strategy(str, enum.Enum):
    GREEDY = "greedy"
    TOP_K = "topk"
    TOP_P = "topp"
    BEAM = "beam"


@dataclass(frozen=True)
class DecodeConfig:
    strategy: Strategy = Strategy.GREEDY
    beam_size: int = 4
    k: int = 5
    p: float = 0.9
    temperature: float = 0.0
    max_tokens: int = 256
    constrained: bool = True
    seed: int = 0
    skip_forced: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.beam_size < 1:
            raise ValueError("beam_size must be positive")
        if self.k < 1:
            raise ValueError("k must be positive")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class RawState:
    """Tracking for regular decoding: stops at EOS or a ``)`` outside quotes."""

    in_quote: bool = False
    done: bool = False

    @property
    def phase(self) -> Phase | None:
        return Phase.DONE if self.done else None


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    logprob: float
    state: GenerationState | RawState
    forward_passes: int = 0
    text: str = ""
    events: tuple[tuple, ...] = ()

    @property
    def finished(self) -> bool:
        return self.state.phase is Phase.DONE


@dataclass
class CandidateSet:
    hypotheses: list[Hypothesis]
    forward_passes: int = 0
    dropped: int = 0

    def __iter__(self) -> Iterator[Hypothesis]:
        return iter(self.hypotheses)

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __getitem__(self, i):
        return self.hypotheses[i]

    @property
    def top(self) -> Hypothesis:
        return self.hypotheses[0]

    def texts(self) -> list[str]:
        return [h.text for h in self.hypotheses]


def restricted_logprobs(
    logits: np.ndarray, allowed: Sequence[int], temperature: float = 0.0
) -> np.ndarray:
    """Log-softmax of ``logits[allowed]``; temperature 0 scores at temperature 1."""
    t = temperature if temperature > 0 else 1.0
    z = np.asarray(logits, dtype=np.float64)[list(allowed)] / t
    m = z.max()
    if not np.isfinite(m):
        return np.full(len(z), -math.log(len(z)))
    return z - (m + math.log(np.exp(z - m).sum()))


def _ranked(lp: np.ndarray, allowed: Sequence[int]) -> list[int]:
    """Positions of ``allowed`` by descending logprob, lowest token id first on ties."""
    return sorted(range(len(allowed)), key=lambda i: (-lp[i], allowed[i]))


def masked_step(
    logits: np.ndarray,
    allowed: Sequence[int],
    cfg: DecodeConfig,
    rng: np.random.Generator | None = None,
) -> list[tuple[int, float]]:
    """Choose continuations among ``allowed`` from one LM output.

    The mask is applied before top-k / nucleus truncation. Returns one
    ``(token, logprob delta)`` pair, or up to ``beam_size`` for beam search.
    """
    if not allowed:
        raise EmptyMask("no allowed token")
    if len(allowed) == 1:
        # forced: no sampling, so the RNG stream matches a skipped step
        return [(allowed[0], 0.0)]
    lp = restricted_logprobs(logits, allowed, cfg.temperature)
    order = _ranked(lp, allowed)
    if cfg.strategy is Strategy.BEAM:
        return [(allowed[i], float(lp[i])) for i in order[: cfg.beam_size]]
    if cfg.strategy is Strategy.GREEDY or cfg.temperature == 0:
        i = order[0]
        return [(allowed[i], float(lp[i]))]
    if cfg.strategy is Strategy.TOP_K:
        keep = order[: cfg.k]
    else:
        probs = np.exp(lp[order])
        cut = int(np.searchsorted(np.cumsum(probs), cfg.p - 1e-12)) + 1
        keep = order[: max(1, min(cut, len(order)))]
    p = np.exp(lp[keep])
    i = keep[int(rng.choice(len(keep), p=p / p.sum()))]
    return [(allowed[i], float(lp[i]))]


class _Overflow(Exception):
    def __init__(self, hyp: Hypothesis):
        self.hyp = hyp


class _CountingLM:
    def __init__(self, lm: LMProvider, context: PromptContext, vocab_size: int):
        self.lm = lm
        self.context = context
        self.vocab_size = vocab_size
        self.calls = 0

    def __call__(self, prefix: Sequence[int]) -> np.ndarray:
        self.calls += 1
        logits = np.asarray(self.lm.next_logits(list(prefix), self.context), dtype=np.float64)
        if logits.shape != (self.vocab_size,):
            raise ProtocolError(f"expected {self.vocab_size} logits, got {logits.shape}")
        return logits


class _RawPolicy:
    def __init__(self, vocab: Vocab):
        self.vocab = vocab
        self.ids = tuple(i for i in range(vocab.size) if i not in (BOS, UNK))

    def initial(self) -> RawState:
        return RawState()

    def allowed(self, state: RawState) -> tuple[int, ...]:
        return self.ids

    def advance(self, state: RawState, tid: int):
        if tid == EOS:
            return replace(state, done=True), None
        in_quote = state.in_quote
        for ch in self.vocab.piece(tid):
            if ch == '"':
                in_quote = not in_quote
            elif ch == ")" and not in_quote:
                return RawState(in_quote, True), None
        return RawState(in_quote, False), None


@dataclass
class Decoder:
    """Decodes API calls for one vocabulary; tries are memoized across calls."""

    vocab: Vocab
    cache: TrieCache = field(default_factory=TrieCache)

    def machine(self, table: ConstraintTable) -> ConstraintMachine:
        return ConstraintMachine(table, self.vocab, self.cache)

    def decode(
        self,
        context: PromptContext,
        lm: LMProvider,
        table: ConstraintTable | None,
        cfg: DecodeConfig,
    ) -> CandidateSet:
        policy = self.machine(table) if cfg.constrained else _RawPolicy(self.vocab)
        run = _Run(policy, _CountingLM(lm, context, self.vocab.size), self.vocab, cfg)
        if cfg.strategy is Strategy.BEAM:
            return run.beam()
        return run.single()


def decode(
    context: PromptContext,
    lm: LMProvider,
    table: ConstraintTable | None,
    cfg: DecodeConfig,
    vocab: Vocab,
    cache: TrieCache | None = None,
) -> CandidateSet:
    return Decoder(vocab, cache or TrieCache()).decode(context, lm, table, cfg)


class _Run:
    def __init__(self, policy, lm: _CountingLM, vocab: Vocab, cfg: DecodeConfig):
        self.policy = policy
        self.lm = lm
        self.vocab = vocab
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)

    def _push(self, h: Hypothesis, tid: int, delta: float, passes: int) -> Hypothesis:
        if len(h.tokens) >= self.cfg.max_tokens:
            raise _Overflow(h)
        state, event = self.policy.advance(h.state, tid)
        events = h.events
        if event is not None:
            events = events + ((event[0], event[1], len(h.tokens) + 1, h.forward_passes + passes),)
        return Hypothesis(
            tokens=h.tokens + (tid,),
            logprob=h.logprob + delta,
            state=state,
            forward_passes=h.forward_passes + passes,
            text=h.text + (self.vocab.piece(tid) if tid > UNK else ""),
            events=events,
        )

    def _settle(self, h: Hypothesis) -> Hypothesis:
        """Append forced moves until a real decision point or the end."""
        while not h.finished:
            allowed = self.policy.allowed(h.state)
            if not allowed:
                raise EmptyMask(f"no token allowed in phase {h.state.phase}")
            if len(allowed) > 1:
                return h
            if self.cfg.skip_forced:
                h = self._push(h, allowed[0], 0.0, 0)
            else:
                (tid, delta), = masked_step(self.lm(h.tokens), allowed, self.cfg, self.rng)
                h = self._push(h, tid, delta, 1)
        return h

    def _expand(self, h: Hypothesis) -> list[Hypothesis]:
        allowed = self.policy.allowed(h.state)
        if not allowed:
            raise EmptyMask(f"no token allowed in phase {h.state.phase}")
        choices = masked_step(self.lm(h.tokens), allowed, self.cfg, self.rng)
        out = []
        for tid, delta in choices:
            try:
                out.append(self._settle(self._push(h, tid, delta, 1)))
            except _Overflow as exc:
                if self.cfg.strategy is not Strategy.BEAM:
                    raise
                self._partial = exc.hyp
                self.dropped += 1
        return out

    def _root(self) -> Hypothesis:
        return Hypothesis((), 0.0, self.policy.initial())

    def single(self) -> CandidateSet:
        try:
            h = self._settle(self._root())
            while not h.finished:
                h = self._expand(h)[0]
        except _Overflow as exc:
            raise MaxTokensExceeded(exc.hyp) from None
        return CandidateSet([h], self.lm.calls)

    def beam(self) -> CandidateSet:
        size = self.cfg.beam_size
        self.dropped = 0
        self._partial = None
        try:
            root = self._settle(self._root())
        except _Overflow as exc:
            raise MaxTokensExceeded(exc.hyp) from None
        frontier, finished = ([], [root]) if root.finished else ([root], [])
        while frontier and len(finished) < size:
            candidates = [c for h in frontier for c in self._expand(h)]
            candidates.sort(key=_rank_key)
            frontier = []
            for rank, c in enumerate(candidates):
                if c.finished:
                    # a finished candidate only counts if it ranks within the beam
                    if rank < size:
                        finished.append(c)
                        if len(finished) >= size:
                            break
                else:
                    frontier.append(c)
                    if len(frontier) >= size:
                        break
        if not finished:
            partial = self._partial or root
            raise MaxTokensExceeded(partial)
        finished.sort(key=_rank_key)
        return CandidateSet(finished[:size], self.lm.calls, self.dropped)


def _rank_key(h: Hypothesis):
    return (-h.logprob, h.tokens)
