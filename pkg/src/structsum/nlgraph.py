"""Graphs over annotated natural-language documents.

Node layout: token nodes (the sequence prefix), then one node per sentence,
then one node per multi-token entity mention.  Edge families:

* ``Next``: consecutive tokens within a sentence and consecutive sentence
  nodes (when sentence nodes are disabled the token chain runs through the
  whole document instead);
* ``In``: token -> its sentence node, token -> entity node;
* ``Ref``: head token of a coreference mention -> head token of the
  previous mention of the same chain;
* ``Eq``: token -> most recent earlier token with the same stem.

Annotations are produced by external tools and only ingested here.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Sequence

from .graph import SEQUENCE, SUPPLEMENTARY, Graph

SENTENCE_LABEL = "SENTENCE"


class DocumentError(ValueError):
    pass


@dataclass
class AnnotatedDocument:
    """Token spans are half-open ``(start, end)`` pairs."""

    tokens: list
    sentence_spans: list
    entities: list = field(default_factory=list)  # [((start, end), type_label), ...]
    coref_chains: list = field(default_factory=list)  # [[(start, end), ...], ...]
    stems: list | None = None
    summary_tokens: list = field(default_factory=list)

    def validate(self) -> None:
        n = len(self.tokens)

        def check(span, what):
            s, e = span
            if not (0 <= s < e <= n):
                raise DocumentError(f"{what} span {span} out of range for {n} tokens")

        expected = 0
        for span in self.sentence_spans:
            check(span, "sentence")
            if span[0] != expected:
                raise DocumentError("sentence spans must partition the tokens in order")
            expected = span[1]
        if expected != n or (n and not self.sentence_spans):
            raise DocumentError("sentence spans must cover every token")
        ent_spans = sorted(tuple(span) for span, _ in self.entities)
        for span in ent_spans:
            check(span, "entity")
        for a, b in zip(ent_spans, ent_spans[1:]):
            if b[0] < a[1]:
                raise DocumentError(f"overlapping entity spans {a} and {b}")
        for chain in self.coref_chains:
            for span in chain:
                check(span, "coreference")
        if self.stems is not None and len(self.stems) != n:
            raise DocumentError("stems must align with tokens")


@dataclass(frozen=True)
class NlGraphConfig:
    sentence_nodes: bool = True
    entity_nodes: bool = True
    coref_edges: bool = True
    stem_edges: bool = False

    @property
    def edge_type_names(self) -> tuple:
        names = ["Next"]
        if self.sentence_nodes or self.entity_nodes:
            names.append("In")
        if self.coref_edges:
            names.append("Ref")
        if self.stem_edges:
            names.append("Eq")
        return tuple(names)

    @property
    def num_edge_types(self) -> int:
        return len(self.edge_type_names)


def _is_stopped(token: str) -> bool:
    return len(token) <= 1 or all(ch in string.punctuation for ch in token)


def stem_eq_edges(tokens: Sequence[str], stems: Sequence[str] | None = None) -> list:
    """Link each token to the most recent earlier token with an equal stem.

    Without stems the lowercased token is the key.  Single-character and
    pure-punctuation tokens are skipped.
    """
    if stems is not None and len(stems) != len(tokens):
        raise DocumentError("stems must align with tokens")
    last = {}
    edges = []
    for i, tok in enumerate(tokens):
        if _is_stopped(tok):
            continue
        key = stems[i] if stems is not None else tok.lower()
        if key in last:
            edges.append((i, last[key]))
        last[key] = i
    return edges


def build_nl_graph(doc: AnnotatedDocument, cfg: NlGraphConfig = NlGraphConfig()) -> Graph:
    doc.validate()
    n = len(doc.tokens)
    labels = list(doc.tokens)
    kinds = [SEQUENCE] * n
    edges = {name: [] for name in cfg.edge_type_names}

    if cfg.sentence_nodes:
        sent_nodes = []
        for s, e in doc.sentence_spans:
            node = len(labels)
            labels.append(SENTENCE_LABEL)
            kinds.append(SUPPLEMENTARY)
            sent_nodes.append(node)
            edges["Next"].extend((j, j + 1) for j in range(s, e - 1))
            edges["In"].extend((j, node) for j in range(s, e))
        edges["Next"].extend(zip(sent_nodes, sent_nodes[1:]))
    else:
        edges["Next"].extend((j, j + 1) for j in range(n - 1))

    if cfg.entity_nodes:
        for (s, e), etype in doc.entities:
            if e - s < 2:
                continue
            node = len(labels)
            labels.append(etype)
            kinds.append(SUPPLEMENTARY)
            edges["In"].extend((j, node) for j in range(s, e))

    if cfg.coref_edges:
        for chain in doc.coref_chains:
            heads = [span[0] for span in chain]
            edges["Ref"].extend(zip(heads[1:], heads[:-1]))

    if cfg.stem_edges:
        edges["Eq"] = stem_eq_edges(doc.tokens, doc.stems)

    return Graph.build(labels, kinds, [edges[n_] for n_ in cfg.edge_type_names], cfg.edge_type_names)
