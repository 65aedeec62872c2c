from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scd.tokenizer import BOS, EOS, UNK, InvalidId, Untokenizable, Vocab, decode, encode


def test_package_name_splits_into_five_pieces(vocab):
    ids = encode(vocab, "Restaurants_1")
    assert [vocab.piece(i) for i in ids] == ["Rest", "aur", "ants", "_", "1"]
    assert decode(vocab, ids) == "Restaurants_1"


def test_empty():
    v = Vocab.from_pieces(["a"])
    assert encode(v, "") == []
    assert decode(v, []) == ""


def test_specials_reserved():
    v = Vocab.from_pieces(["a", "b"])
    assert (BOS, EOS, UNK) == (0, 1, 2)
    assert v.size == 5
    assert decode(v, [BOS, v.id_of("a"), EOS]) == "a"


def test_longest_match_first():
    v = Vocab.from_pieces(["a", "b", "ab", "abc", "c"])
    assert [v.piece(i) for i in v.encode("abcab")] == ["abc", "ab"]


def test_untokenizable_offset():
    v = Vocab.from_pieces(["a", "b"])
    with pytest.raises(Untokenizable) as err:
        v.encode("abxa")
    assert err.value.offset == 2


def test_invalid_id():
    v = Vocab.from_pieces(["a"])
    with pytest.raises(InvalidId):
        v.decode([99])
    with pytest.raises(InvalidId):
        v.decode([-1])


def test_duplicate_pieces_rejected():
    with pytest.raises(ValueError):
        Vocab(("<s>", "</s>", "<unk>", "a", "a"))


def test_file_round_trip(tmp_path):
    v = Vocab.from_pieces(["a", "line\nbreak", "back\\slash", " "])
    path = tmp_path / "vocab.txt"
    v.save(path)
    again = Vocab.load(path)
    assert again == v
    assert again.fingerprint == v.fingerprint


def test_random_round_trip():
    # independent oracle: concatenating the pieces of each id reproduces the input
    rng = np.random.default_rng(0)
    alphabet = list("abcdefgh _.")
    multi = {"".join(rng.choice(alphabet, size=int(rng.integers(2, 5)))) for _ in range(30)}
    v = Vocab.from_pieces(sorted(multi) + alphabet)
    for _ in range(1000):
        s = "".join(rng.choice(alphabet, size=int(rng.integers(0, 30))))
        ids = v.encode(s)
        assert "".join(v.pieces[i] for i in ids) == s
        assert v.decode(ids) == s
        assert v.encode(s) == ids


@given(st.lists(st.text(alphabet="xyz", min_size=1, max_size=4), max_size=10), st.text(alphabet="xyz"))
@settings(max_examples=200, deadline=None)
def test_greedy_segmentation_property(pieces, text):
    v = Vocab.from_pieces(pieces + ["x", "y", "z"])
    ids = v.encode(text)
    assert v.decode(ids) == text
    # each emitted piece is the longest vocab piece matching at its offset
    pos = 0
    for i in ids:
        piece = v.piece(i)
        longer = [p for p in v.pieces[3:] if len(p) > len(piece) and text.startswith(p, pos)]
        assert not longer
        pos += len(piece)
