"""Greedy longest-match tokenizer over a fixed piece vocabulary.

The first three ids are reserved for BOS, EOS and UNK. They never match text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

BOS, EOS, UNK = 0, 1, 2
SPECIAL_MARKERS = ("<s>", "</s>", "<unk>")


class TokenizerError(Exception):
    pass


class Untokenizable(TokenizerError):
    def __init__(self, text: str, offset: int):
        super().__init__(f"no piece matches {text[offset:offset + 10]!r} at offset {offset}")
        self.text = text
        self.offset = offset


class InvalidId(TokenizerError):
    pass


@dataclass(frozen=True)
class Vocab:
    pieces: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)
    _max_len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.pieces) < 3:
            raise ValueError("vocab needs the three reserved special pieces")
        if len(set(self.pieces)) != len(self.pieces):
            raise ValueError("vocab pieces must be unique")
        if any(not p for p in self.pieces[3:]):
            raise ValueError("empty piece")
        index = {p: i for i, p in enumerate(self.pieces) if i > UNK}
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_max_len", max((len(p) for p in index), default=0))

    @classmethod
    def from_pieces(cls, pieces: Iterable[str]) -> "Vocab":
        """Prepend the special markers and drop duplicates, keeping order."""
        seen = dict.fromkeys(p for p in pieces if p and p not in SPECIAL_MARKERS)
        return cls(SPECIAL_MARKERS + tuple(seen))

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(_unescape(line) for line in lines))

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(_escape(p) + "\n" for p in self.pieces), encoding="utf-8")

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def size(self) -> int:
        return len(self.pieces)

    def id_of(self, piece: str) -> int:
        """Id of a piece, or KeyError."""
        return self._index[piece]

    def has_piece(self, piece: str) -> bool:
        return piece in self._index

    def piece(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.pieces):
            raise InvalidId(token_id)
        return self.pieces[token_id]

    @cached_property
    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.pieces).encode("utf-8")).hexdigest()[:16]

    def encode(self, text: str) -> list[int]:
        ids = []
        i, n = 0, len(text)
        while i < n:
            for length in range(min(self._max_len, n - i), 0, -1):
                tid = self._index.get(text[i:i + length])
                if tid is not None:
                    ids.append(tid)
                    i += length
                    break
            else:
                raise Untokenizable(text, i)
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        out = []
        for tid in ids:
            if not 0 <= tid < len(self.pieces):
                raise InvalidId(tid)
            if tid > UNK:
                out.append(self.pieces[tid])
        return "".join(out)

    def check_covers(self, strings: Iterable[str]) -> None:
        """Raise Untokenizable for the first string that cannot be encoded."""
        for s in strings:
            self.encode(s)


def encode(vocab: Vocab, text: str) -> list[int]:
    return vocab.encode(text)


def decode(vocab: Vocab, ids: Sequence[int]) -> str:
    return vocab.decode(ids)


def _escape(piece: str) -> str:
    return piece.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape(line: str) -> str:
    out, i = [], 0
    while i < len(line):
        c = line[i]
        if c == "\\" and i + 1 < len(line):
            nxt = line[i + 1]
            out.append("\n" if nxt == "n" else nxt)
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)
