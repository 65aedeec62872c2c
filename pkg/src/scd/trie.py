"""Constrained token search trie.

A trie over the token encodings of a set of constraint strings. Decoding walks
the trie from the root: a node with several children (or a terminal node that
also has children) needs the LM to choose, while a single-child chain can be
appended without a forward pass.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator

from .tokenizer import Vocab


class TrieNode:
    __slots__ = ("children", "terminal")

    def __init__(self) -> None:
        self.children: dict[int, TrieNode] = {}
        self.terminal = False

    @property
    def branching(self) -> bool:
        return len(self.children) > 1 or (self.terminal and bool(self.children))

    def __repr__(self) -> str:
        return f"TrieNode(children={sorted(self.children)}, terminal={self.terminal})"


@dataclass(frozen=True)
class TokenTrie:
    root: TrieNode
    entry_count: int
    strings: tuple[str, ...] = field(default=(), compare=False)

    def sequences(self) -> Iterator[tuple[int, ...]]:
        """All terminal-reaching token paths, depth first in token-id order."""
        stack: list[tuple[TrieNode, tuple[int, ...]]] = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            if node.terminal:
                yield path
            for tid in sorted(node.children, reverse=True):
                stack.append((node.children[tid], path + (tid,)))

    def walk(self, ids: Iterable[int]) -> TrieNode | None:
        node = self.root
        for tid in ids:
            node = node.children.get(tid)
            if node is None:
                return None
        return node

    def accepts(self, ids: Iterable[int]) -> bool:
        node = self.walk(ids)
        return node is not None and node.terminal

    def dump(self, vocab: Vocab | None = None) -> str:
        """Depth-first listing, one node per line: ``id/piece [terminal] [branch]``."""
        lines: list[str] = []

        def visit(node: TrieNode, depth: int) -> None:
            for tid in sorted(node.children):
                child = node.children[tid]
                label = f"{tid}/{vocab.piece(tid)!r}" if vocab is not None else str(tid)
                flags = (" terminal" if child.terminal else "") + (
                    " branch" if child.branching else ""
                )
                lines.append("  " * depth + label + flags)
                visit(child, depth + 1)

        visit(self.root, 0)
        return "\n".join(lines)


def build_trie(strings: Iterable[str], vocab: Vocab) -> TokenTrie:
    """Insert ``vocab.encode(s)`` for each string.

    An empty input gives a trie whose root has no children; the decoder
    reports that as an empty mask.
    """
    uniq = tuple(dict.fromkeys(strings))
    root = TrieNode()
    for s in uniq:
        node = root
        for tid in vocab.encode(s):
            node = node.children.setdefault(tid, TrieNode())
        node.terminal = True
    return TokenTrie(root, len(uniq), uniq)


def allowed_next(cursor: TrieNode) -> tuple[frozenset[int], bool]:
    """Child token ids of ``cursor`` and whether a constraint string may end here."""
    return frozenset(cursor.children), cursor.terminal


def skip_chain(cursor: TrieNode) -> tuple[list[int], TrieNode]:
    """Follow single-child links from a non-terminal node.

    Stops at the first branching node, terminal node or leaf.
    """
    appended = []
    node = cursor
    while len(node.children) == 1 and not node.terminal:
        (tid, node), = node.children.items()
        appended.append(tid)
    return appended, node


def decision_count(trie: TokenTrie, ids: Iterable[int]) -> int:
    """Forward passes needed to emit ``ids`` as one whole constraint string.

    One pass per node on the path where the choice is not forced; reaching the
    terminal node counts as a choice only if the node also has children.
    """
    node = trie.root
    passes = int(node.branching)
    for tid in ids:
        node = node.children[tid]
        passes += node.branching
    return passes


class TrieCache:
    """Memoized tries keyed by ``(query key, vocab fingerprint)``.

    Safe for concurrent use: a lost race builds the same trie twice and the
    first stored instance wins.
    """

    def __init__(self) -> None:
        self._tries: dict[Hashable, TokenTrie] = {}
        self._lock = threading.Lock()

    def get(self, key: Hashable, vocab: Vocab, strings: Callable[[], Iterable[str]]) -> TokenTrie:
        full = (key, vocab.fingerprint)
        trie = self._tries.get(full)
        if trie is not None:
            return trie
        built = build_trie(sorted(strings()), vocab)
        with self._lock:
            return self._tries.setdefault(full, built)

    def __len__(self) -> int:
        return len(self._tries)
