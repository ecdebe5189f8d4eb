import numpy as np
import pytest
from hypothesis import strategies as st

from structsum.graph import SEQUENCE, SUPPLEMENTARY, Graph


def random_graph(rng: np.random.Generator, edge_types: int = 2, max_nodes: int = 30, min_nodes: int = 1) -> Graph:
    n = int(rng.integers(min_nodes, max_nodes + 1))
    n_seq = int(rng.integers(1, n + 1))
    labels = [f"w{int(i)}" for i in rng.integers(0, 20, n)]
    kinds = [SEQUENCE] * n_seq + [SUPPLEMENTARY] * (n - n_seq)
    edges = []
    for _ in range(edge_types):
        m = int(rng.integers(0, 2 * n + 1))
        edges.append([tuple(int(x) for x in rng.integers(0, n, 2)) for _ in range(m)])
    return Graph.build(labels, kinds, edges, [f"t{k}" for k in range(edge_types)])


@st.composite
def graphs(draw, edge_types: int = 2, max_nodes: int = 12):
    n = draw(st.integers(1, max_nodes))
    n_seq = draw(st.integers(1, n))
    labels = draw(st.lists(st.sampled_from(["a", "b", "c", "fooBar"]), min_size=n, max_size=n))
    pair = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
    edges = [draw(st.lists(pair, max_size=2 * n)) for _ in range(edge_types)]
    kinds = [SEQUENCE] * n_seq + [SUPPLEMENTARY] * (n - n_seq)
    return Graph.build(labels, kinds, edges, [f"t{k}" for k in range(edge_types)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- builder invariants (shared by unit and acceptance tests) ------------------


def _edge_set(g, name):
    if name not in g.edge_type_names:
        return np.zeros((0, 2), dtype=np.int64)
    return g.edge_lists[g.edge_type_names.index(name)]


def code_graph_violations(g, method, num_edge_types) -> list:
    from structsum.codegraph import split_subtokens
    from structsum.graph import validate_graph

    out = list(validate_graph(g, num_edge_types).violations)
    owner = {}  # subtoken node -> identifier node
    pos, ident = 0, g.sequence_length
    for text, is_id in method.tokens:
        parts = split_subtokens(text) if is_id else [text]
        if is_id:
            if "".join(parts) != text.replace("_", "").lower():
                out.append(f"subtoken round trip failed for {text!r}")
            for p in range(pos, pos + len(parts)):
                owner[p] = ident
            ident += 1
        pos += len(parts)
    if pos != g.sequence_length:
        out.append("sequence prefix does not match the subtoken count")
    intoken = _edge_set(g, "InToken")
    if len(intoken) and {(int(a), int(b)) for a, b in intoken} != set(owner.items()):
        out.append("InToken edges do not map subtokens to their identifier node")
    if len(intoken) and len(set(intoken[:, 0].tolist())) != len(intoken):
        out.append("a subtoken node has more than one InToken edge")
    llu = _edge_set(g, "LastLexicalUse")
    n = g.node_count
    if np.bincount(llu[:, 0], minlength=n).max(initial=0) > 1 or np.bincount(llu[:, 1], minlength=n).max(initial=0) > 1:
        out.append("LastLexicalUse edges are not vertex-disjoint paths")
    if any(g.node_labels[a] != g.node_labels[b] or a <= b for a, b in llu.tolist()):
        out.append("LastLexicalUse edge joins different identifiers or points forward")
    child = _edge_set(g, "Child")
    if len(child):
        ast_start = n - sum(1 for _ in method.ast.preorder())
        inner = child[child[:, 1] >= ast_start]
        if np.bincount(inner[:, 1], minlength=n).max() > 1:
            out.append("an AST node has two parents")
        if np.any(inner[:, 0] >= inner[:, 1]) or np.any(child[:, 0] < ast_start):
            out.append("Child edges are not a forest over AST nodes")
    return out


def nl_graph_violations(g, doc, cfg) -> list:
    from structsum.graph import validate_graph
    from structsum.nlgraph import SENTENCE_LABEL

    out = list(validate_graph(g, cfg.num_edge_types).violations)
    n = len(doc.tokens)
    sentence_of = {}
    for s, (lo, hi) in enumerate(doc.sentence_spans):
        for t in range(lo, hi):
            sentence_of[t] = s
    sent_nodes = [i for i in range(n, g.node_count) if g.node_labels[i] == SENTENCE_LABEL] if cfg.sentence_nodes else []
    if cfg.sentence_nodes:
        if len(sent_nodes) != len(doc.sentence_spans):
            out.append("one sentence node per sentence expected")
        into = {}
        for a, b in _edge_set(g, "In").tolist():
            if b in sent_nodes:
                into.setdefault(a, []).append(sent_nodes.index(b))
        if sorted(into) != list(range(n)) or any(v != [sentence_of[t]] for t, v in into.items()):
            out.append("a token lacks exactly one In edge to its covering sentence")
        for a, b in _edge_set(g, "Next").tolist():
            if a < n and b < n and sentence_of[a] != sentence_of[b]:
                out.append("a token Next edge crosses a sentence boundary")
                break
    multi = sum(1 for (s, e), _ in doc.entities if e - s >= 2)
    expected_nodes = n + len(sent_nodes) + (multi if cfg.entity_nodes else 0)
    if g.node_count != expected_nodes:
        out.append(f"node count {g.node_count} != {expected_nodes}")
    if cfg.coref_edges and len(_edge_set(g, "Ref")) != sum(len(c) - 1 for c in doc.coref_chains):
        out.append("Ref edges do not form one path per coreference chain")
    return out


# -- acceptance summary --------------------------------------------------------

ACCEPTANCE_LINES = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
