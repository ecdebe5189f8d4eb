"""Token vocabulary with reserved ids."""

from __future__ import annotations

from collections import Counter
from typing import Iterable

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(4)


class Vocabulary:
    def __init__(self, tokens: Iterable[str]):
        self.tokens = list(RESERVED)
        for tok in tokens:
            if tok not in RESERVED:
                self.tokens.append(tok)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def ids(self, tokens: Iterable[str]) -> list:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def token(self, i: int) -> str:
        return self.tokens[i]


def build_vocab(corpus, min_count: int = 1, max_size: int | None = None) -> Vocabulary:
    """Frequency-sorted vocabulary; ties are broken lexicographically.

    ``corpus`` is an iterable of token lists (plain strings are split on
    whitespace).  Ids 0-3 are reserved for PAD, UNK, BOS and EOS.
    ``max_size`` caps the number of non-reserved entries.
    """
    counts = Counter()
    empty = True
    for item in corpus:
        empty = False
        counts.update(item.split() if isinstance(item, str) else item)
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted((tok for tok, n in counts.items() if n >= min_count and tok not in RESERVED), key=lambda t: (-counts[t], t))
    if max_size is not None:
        ranked = ranked[:max_size]
    return Vocabulary(ranked)
