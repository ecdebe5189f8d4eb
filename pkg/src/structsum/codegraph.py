"""Program graphs over subtokenised source code.

Node layout of a built graph:

1. one sequence node per subtoken (identifiers split into subtokens,
   everything else kept verbatim), in source order;
2. one node per identifier occurrence, labelled with the full identifier;
3. one node per syntax-tree node, in preorder.

Edge families: ``Next`` (consecutive subtokens, always present),
``InToken`` (subtoken -> its identifier node), ``NextToken`` (consecutive
identifier nodes), ``Child`` (syntax parent -> child, and syntax leaf -> the
identifier or token node it covers) and ``LastLexicalUse`` (identifier
occurrence -> previous occurrence of the same identifier).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .graph import SEQUENCE, SUPPLEMENTARY, Graph

PLACEHOLDER = "%NAME%"

_SUBTOKEN = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+|[^\W\d_A-Za-z]+")


class CodeGraphError(ValueError):
    pass


def split_subtokens(identifier: str) -> list:
    """Split an identifier on camelCase, PascalCase, underscores and digit runs.

    >>> split_subtokens("HTMLParser")
    ['html', 'parser']
    >>> split_subtokens("pascal_case")
    ['pascal', 'case']
    """
    parts = [p.lower() for p in _SUBTOKEN.findall(identifier)]
    return parts or [identifier]


@dataclass(frozen=True)
class AstNode:
    label: str
    children: tuple = ()
    token: int | None = None

    def to_json(self) -> dict:
        out = {"label": self.label}
        if self.token is not None:
            out["token"] = self.token
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "AstNode":
        return cls(obj["label"], tuple(cls.from_json(c) for c in obj.get("children", ())), obj.get("token"))

    def preorder(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


@dataclass
class CodeMethod:
    """A tokenised method with its syntax tree.

    ``tokens`` holds ``(text, is_identifier)`` pairs; the method name is
    already replaced by :data:`PLACEHOLDER`.  ``target`` is the name's
    subtokens (naming) or the documentation tokens (docs).
    """

    tokens: list
    ast: AstNode | None
    target: list = field(default_factory=list)


@dataclass(frozen=True)
class CodeGraphConfig:
    in_token: bool = True
    next_token: bool = True
    child: bool = True
    last_lexical_use: bool = True

    @property
    def edge_type_names(self) -> tuple:
        flags = (("InToken", self.in_token), ("NextToken", self.next_token), ("Child", self.child),
                 ("LastLexicalUse", self.last_lexical_use))
        return ("Next",) + tuple(name for name, on in flags if on)

    @property
    def num_edge_types(self) -> int:
        return len(self.edge_type_names)

    @classmethod
    def sequence_only(cls) -> "CodeGraphConfig":
        return cls(False, False, False, False)


def last_lexical_use_edges(occurrences: Iterable) -> list:
    """Link each ``(node, text)`` occurrence to the most recent earlier one
    with the same text, as ``(current, previous)`` pairs."""
    last = {}
    edges = []
    for node, text in occurrences:
        if text in last:
            edges.append((node, last[text]))
        last[text] = node
    return edges


def build_code_graph(method: CodeMethod, cfg: CodeGraphConfig = CodeGraphConfig()) -> Graph:
    labels, kinds = [], []
    token_nodes = []
    for text, is_ident in method.tokens:
        subs = split_subtokens(text) if is_ident else [text]
        token_nodes.append(list(range(len(labels), len(labels) + len(subs))))
        labels.extend(subs)
    n_seq = len(labels)
    kinds.extend([SEQUENCE] * n_seq)
    edges = {name: [] for name in cfg.edge_type_names}
    edges["Next"] = [(j, j + 1) for j in range(n_seq - 1)]

    anchor = [nodes[0] for nodes in token_nodes]
    want_ident = cfg.in_token or cfg.next_token or cfg.last_lexical_use or cfg.child
    occurrences = []
    if want_ident:
        for i, (text, is_ident) in enumerate(method.tokens):
            if not is_ident:
                continue
            node = len(labels)
            labels.append(text)
            kinds.append(SUPPLEMENTARY)
            anchor[i] = node
            occurrences.append((node, text))
            if cfg.in_token:
                edges["InToken"].extend((s, node) for s in token_nodes[i])
    if cfg.next_token:
        edges["NextToken"] = [(a[0], b[0]) for a, b in zip(occurrences, occurrences[1:])]
    if cfg.last_lexical_use:
        edges["LastLexicalUse"] = last_lexical_use_edges(occurrences)

    if cfg.child and method.ast is not None:
        covered = set()
        index = {}
        for node in method.ast.preorder():
            index[id(node)] = len(labels)
            labels.append(node.label)
            kinds.append(SUPPLEMENTARY)
        for node in method.ast.preorder():
            me = index[id(node)]
            for child in node.children:
                edges["Child"].append((me, index[id(child)]))
            if node.token is not None:
                if not 0 <= node.token < len(method.tokens):
                    raise CodeGraphError(f"syntax leaf references token {node.token} out of range")
                if node.token in covered:
                    raise CodeGraphError(f"token {node.token} is covered by two syntax leaves")
                covered.add(node.token)
                edges["Child"].append((me, anchor[node.token]))

    return Graph.build(labels, kinds, [edges[n] for n in cfg.edge_type_names], cfg.edge_type_names)
