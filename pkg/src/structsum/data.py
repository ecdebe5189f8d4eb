"""File formats: JSONL dataset and graph records, checkpoints, config files.

Every record is one compact JSON object per line with a fixed key order, so
reading and re-writing a canonical file reproduces it byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import struct
from pathlib import Path

import numpy as np

from .batching import SummarySample
from .codegraph import PLACEHOLDER, AstNode, CodeGraphConfig, CodeMethod, build_code_graph
from .config import ModelConfig, parameter_shapes
from .graph import KIND_CODES, KIND_NAMES, Graph
from .minilang import KEYWORDS
from .model import SeqGnnModel
from .nlgraph import AnnotatedDocument, NlGraphConfig, build_nl_graph
from .nn import Parameters
from .training import TrainConfig
from .vocab import Vocabulary

SCHEMA = "sgs-v1"
TASKS = ("naming", "docs", "nl")
RECORD_KEYS = ("schema", "id", "task", "tokens", "ast", "sentences", "entities", "corefs", "stems", "target")
GRAPH_KEYS = ("schema", "id", "task", "nodes", "node_labels", "node_kinds", "edge_types", "edges", "target")


class DataError(ValueError):
    """Malformed input data (reported with exit code 2 by the CLI)."""


# -- JSONL ---------------------------------------------------------------------


def dumps(record: dict) -> str:
    order = GRAPH_KEYS if "nodes" in record else RECORD_KEYS
    known = {k: record[k] for k in order if k in record}
    extra = {k: record[k] for k in sorted(record) if k not in known}
    return json.dumps({**known, **extra}, ensure_ascii=False, separators=(",", ":"))


def read_jsonl(path) -> list:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or rec.get("schema") != SCHEMA:
                raise DataError(f"{path}:{lineno}: not a {SCHEMA} record")
            records.append(rec)
    return records


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


# -- dataset records -----------------------------------------------------------

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _identifier_flags(tokens: list, ast: AstNode | None) -> list:
    if ast is not None:
        flags = [False] * len(tokens)
        for node in ast.preorder():
            if node.token is not None and node.label == "Name" and 0 <= node.token < len(tokens):
                flags[node.token] = tokens[node.token] != PLACEHOLDER
        return flags
    return [bool(_IDENT.match(t)) and t not in KEYWORDS and t != PLACEHOLDER for t in tokens]


def method_record(method: CodeMethod, id: str, task: str = "naming") -> dict:
    rec = {"schema": SCHEMA, "id": id, "task": task, "tokens": [t for t, _ in method.tokens]}
    if method.ast is not None:
        rec["ast"] = method.ast.to_json()
    rec["target"] = list(method.target)
    return rec


def document_record(doc: AnnotatedDocument, id: str) -> dict:
    rec = {
        "schema": SCHEMA,
        "id": id,
        "task": "nl",
        "tokens": list(doc.tokens),
        "sentences": [list(s) for s in doc.sentence_spans],
        "entities": [{"span": list(span), "type": t} for span, t in doc.entities],
        "corefs": [[list(s) for s in chain] for chain in doc.coref_chains],
    }
    if doc.stems is not None:
        rec["stems"] = list(doc.stems)
    rec["target"] = list(doc.summary_tokens)
    return rec


def _require(rec: dict, key: str, kind):
    if key not in rec or not isinstance(rec[key], kind):
        raise DataError(f"record {rec.get('id')!r}: missing or malformed {key!r}")
    return rec[key]


def record_to_method(rec: dict) -> CodeMethod:
    tokens = _require(rec, "tokens", list)
    try:
        ast = AstNode.from_json(rec["ast"]) if rec.get("ast") is not None else None
    except (KeyError, TypeError) as exc:
        raise DataError(f"record {rec.get('id')!r}: malformed ast ({exc})") from None
    flags = _identifier_flags(tokens, ast)
    return CodeMethod(list(zip(tokens, flags)), ast, list(_require(rec, "target", list)))


def record_to_document(rec: dict) -> AnnotatedDocument:
    try:
        doc = AnnotatedDocument(
            tokens=list(_require(rec, "tokens", list)),
            sentence_spans=[tuple(s) for s in _require(rec, "sentences", list)],
            entities=[(tuple(e["span"]), e["type"]) for e in rec.get("entities", [])],
            coref_chains=[[tuple(s) for s in chain] for chain in rec.get("corefs", [])],
            stems=rec.get("stems"),
            summary_tokens=list(_require(rec, "target", list)),
        )
        doc.validate()
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"record {rec.get('id')!r}: {exc}") from None
    return doc


def record_graph(rec: dict, code_cfg: CodeGraphConfig = CodeGraphConfig(), nl_cfg: NlGraphConfig = NlGraphConfig()) -> Graph:
    """Build the graph of a dataset record (or decode a stored graph record)."""
    if "nodes" in rec:
        return graph_from_record(rec)
    task = rec.get("task")
    try:
        if task in ("naming", "docs"):
            return build_code_graph(record_to_method(rec), code_cfg)
        if task == "nl":
            return build_nl_graph(record_to_document(rec), nl_cfg)
    except DataError:
        raise
    except ValueError as exc:
        raise DataError(f"record {rec.get('id')!r}: {exc}") from None
    raise DataError(f"record {rec.get('id')!r}: unknown task {task!r}")


def graph_record(graph: Graph, id: str, task: str, target: list) -> dict:
    return {
        "schema": SCHEMA,
        "id": id,
        "task": task,
        "nodes": graph.node_count,
        "node_labels": list(graph.node_labels),
        "node_kinds": [KIND_NAMES[int(k)] for k in graph.node_kinds],
        "edge_types": list(graph.edge_type_names),
        "edges": [e.tolist() for e in graph.edge_lists],
        "target": list(target),
    }


def graph_from_record(rec: dict) -> Graph:
    try:
        kinds = [KIND_CODES[k] for k in rec["node_kinds"]]
        g = Graph.build(rec["node_labels"], kinds, [[tuple(p) for p in e] for e in rec["edges"]], rec["edge_types"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"graph record {rec.get('id')!r}: {exc}") from None
    if g.node_count != rec.get("nodes"):
        raise DataError(f"graph record {rec.get('id')!r}: node count mismatch")
    return g


def record_sample(rec: dict, code_cfg: CodeGraphConfig = CodeGraphConfig(), nl_cfg: NlGraphConfig = NlGraphConfig()) -> SummarySample:
    return SummarySample(record_graph(rec, code_cfg, nl_cfg), list(rec.get("target", [])), str(rec.get("id", "")))


def load_samples(path, code_cfg: CodeGraphConfig = CodeGraphConfig(), nl_cfg: NlGraphConfig = NlGraphConfig()) -> list:
    return [record_sample(r, code_cfg, nl_cfg) for r in read_jsonl(path)]


# -- configuration files -------------------------------------------------------

# Every key accepted in a config file, with its default.  Model sizes follow
# the reference configuration; training values are the optimiser defaults.
DEFAULTS = {
    # model
    "embedding_dim": 128,
    "encoder_hidden": 128,  # per direction
    "gnn_hidden": 128,
    "timesteps": 8,
    "decoder_hidden": 256,
    "encoder": "seq+gnn",  # seq+gnn | seq | gnn
    "readout": "gated",  # gated | average
    "copy": True,
    # graph construction
    "edges": "all",  # comma-separated edge families, "all" or "none"
    # vocabulary
    "min_count": 1,
    "max_vocab": 0,  # 0 = unlimited
    # training
    "batch_size": 16,
    "learning_rate": 1e-3,
    "clip_norm": 5.0,
    "epochs": 10,
    "seed": 0,
    # decoding
    "max_len": 20,
    "beam_width": 1,
}


def _coerce(key: str, raw: str):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise DataError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        return type(default)(raw)
    except ValueError:
        raise DataError(f"config key {key!r}: cannot parse {raw!r}") from None


def parse_config(text: str) -> dict:
    """Parse flat ``key = value`` lines (``#`` starts a comment) over :data:`DEFAULTS`."""
    cfg = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise DataError(f"config line {lineno}: unknown key {key!r}")
        cfg[key] = _coerce(key, value)
    return apply_env(cfg)


def load_config(path=None) -> dict:
    if path is None:
        return apply_env(dict(DEFAULTS))
    return parse_config(Path(path).read_text(encoding="utf-8"))


def apply_env(cfg: dict, environ=None) -> dict:
    """``SGS_SEED`` in the environment overrides the configured seed."""
    environ = os.environ if environ is None else environ
    if environ.get("SGS_SEED", "") != "":
        try:
            cfg["seed"] = int(environ["SGS_SEED"])
        except ValueError:
            raise DataError(f"SGS_SEED must be an integer, got {environ['SGS_SEED']!r}") from None
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"],
        clip_norm=cfg["clip_norm"],
        epochs=cfg["epochs"],
        seed=cfg["seed"],
    )


def model_config(cfg: dict, vocab_size: int, edge_types: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size,
        edge_types=edge_types,
        embedding_dim=cfg["embedding_dim"],
        encoder_hidden=cfg["encoder_hidden"],
        gnn_hidden=cfg["gnn_hidden"],
        timesteps=cfg["timesteps"],
        decoder_hidden=cfg["decoder_hidden"],
        encoder=cfg["encoder"],
        readout=cfg["readout"],
        copy=cfg["copy"],
    )


CODE_FAMILIES = {"intoken": "in_token", "nexttoken": "next_token", "child": "child", "lastlexicaluse": "last_lexical_use"}
NL_FAMILIES = {"sentence": "sentence_nodes", "entity": "entity_nodes", "ref": "coref_edges", "eq": "stem_edges"}


def edge_configs(spec: str) -> tuple:
    """Graph builder configs from an edge-family list such as ``"child,ref"``.

    ``all`` turns every family on except stem equality, which stays opt-in;
    ``none`` leaves only the token sequence.
    """
    spec = spec.strip().lower()
    if spec == "all":
        return CodeGraphConfig(), NlGraphConfig()
    names = set() if spec in ("", "none") else {s.strip() for s in spec.split(",") if s.strip()}
    unknown = names - set(CODE_FAMILIES) - set(NL_FAMILIES)
    if unknown:
        raise DataError(f"unknown edge families: {', '.join(sorted(unknown))}")
    code = CodeGraphConfig(**{field: name in names for name, field in CODE_FAMILIES.items()})
    nl = NlGraphConfig(**{field: name in names for name, field in NL_FAMILIES.items()})
    return code, nl


# -- checkpoints ---------------------------------------------------------------

MAGIC = b"SGSCKPT\x01"
FORMAT_VERSION = 1


def manifest_hash(config: dict, vocabulary: list, layout: list) -> str:
    blob = json.dumps({"config": config, "vocabulary": vocabulary, "parameters": layout}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_checkpoint(path, model: SeqGnnModel, extra: dict | None = None) -> None:
    """Manifest (JSON) followed by the flat little-endian parameter values.

    32-bit parameters are stored as ``<f4``; 64-bit ones as ``<f8``.
    """
    params = model.params
    layout = [{"name": n, "shape": list(params.shapes[n])} for n in params.names]
    config = model.cfg.to_dict()
    vocabulary = list(model.vocab.tokens)
    dtype = "<f4" if params.dtype == np.float32 else "<f8"
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "vocabulary": vocabulary,
        "parameters": layout,
        "dtype": dtype,
        "hash": manifest_hash(config, vocabulary, layout),
        "extra": extra or {},
    }
    head = json.dumps(manifest, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        fh.write(params.data.astype(dtype, copy=False).tobytes())


def read_manifest(path) -> tuple:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataError(f"{path}: not a checkpoint")
        (length,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(length).decode("utf-8"))
        payload = fh.read()
    return manifest, payload


def load_checkpoint(path, expected: ModelConfig | None = None) -> tuple:
    """Returns ``(model, extra)``.  Raises :class:`DataError` on a corrupt file
    or when ``expected`` differs from the stored configuration."""
    manifest, payload = read_manifest(path)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {manifest.get('format_version')}")
    config, vocabulary, layout = manifest["config"], manifest["vocabulary"], manifest["parameters"]
    if manifest_hash(config, vocabulary, layout) != manifest.get("hash"):
        raise DataError(f"{path}: manifest hash mismatch")
    cfg = ModelConfig(**config)
    if expected is not None and expected != cfg:
        raise DataError(f"{path}: checkpoint configuration does not match the requested model")
    shapes = {e["name"]: tuple(e["shape"]) for e in layout}
    if shapes != parameter_shapes(cfg) or [e["name"] for e in layout] != list(parameter_shapes(cfg)):
        raise DataError(f"{path}: parameter layout does not match the configuration")
    dtype = np.dtype(manifest["dtype"])
    values = np.frombuffer(payload, dtype=dtype)
    params = Parameters(shapes, dtype=dtype.newbyteorder("="))
    if values.size != params.size:
        raise DataError(f"{path}: expected {params.size} values, found {values.size}")
    params.data[:] = values
    return SeqGnnModel(cfg, Vocabulary(vocabulary), params=params), manifest.get("extra", {})
