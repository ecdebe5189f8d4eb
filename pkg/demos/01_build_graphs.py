"""Turn a small method and a short story into graphs, then batch them."""

from structsum.codegraph import CodeGraphConfig, build_code_graph
from structsum.graph import flatten_batch
from structsum.minilang import parse_method
from structsum.nlgraph import NlGraphConfig, build_nl_graph
from structsum.data import record_to_document
from structsum.synthetic import generate_synthetic_corpus

# A method in the built-in mini language; its name becomes the target.
method = parse_method("def addItem(itemList, newItem) { itemList = push(itemList, newItem); return itemList; }")
print("target:", method.target)
code_graph = build_code_graph(method, CodeGraphConfig())
print("code graph:", code_graph.node_count, "nodes,", code_graph.sequence_length, "of them subtokens")
for name, edges in zip(code_graph.edge_type_names, code_graph.edge_lists):
    print(f"  {name:15s} {len(edges):3d} edges")

# The pure-sequence ablation keeps only the subtoken chain.
chain = build_code_graph(method, CodeGraphConfig.sequence_only())
print("sequence-only graph:", chain.node_count, "nodes,", chain.edge_count, "edges")

# A generated story with entities and coreference chains.
doc = record_to_document(generate_synthetic_corpus("nl-toy", 1, seed=3)[0])
print("story:", " ".join(doc.tokens))
nl_graph = build_nl_graph(doc, NlGraphConfig(stem_edges=True))
print("text graph labels beyond the tokens:", nl_graph.node_labels[len(doc.tokens):])

# Flattening merges graphs into one graph with disjoint components.
code_graph_2 = build_code_graph(parse_method("def getName() { return name; }"))
batch = flatten_batch([code_graph, code_graph_2])
print("flattened:", batch.flattened.node_count, "nodes; offsets", batch.node_offsets.tolist())
