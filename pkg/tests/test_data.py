import random
from collections import Counter

import numpy as np
import pytest

from structsum.codegraph import CodeGraphConfig
from structsum.data import (
    DEFAULTS,
    DataError,
    apply_env,
    dumps,
    edge_configs,
    graph_from_record,
    graph_record,
    load_checkpoint,
    load_samples,
    parse_config,
    read_jsonl,
    read_manifest,
    record_graph,
    record_to_document,
    record_to_method,
    save_checkpoint,
    write_jsonl,
)
from structsum.model import SeqGnnModel, vocabulary_for
from structsum.nlgraph import NlGraphConfig
from structsum.synthetic import generate_synthetic_corpus, longest_lexical_use_span
from structsum.verify import micro_config
from structsum.vocab import UNK_ID, build_vocab


def test_build_vocab_examples():
    vocab = build_vocab(["a a b"])
    assert (vocab.id("a"), vocab.id("b")) == (4, 5)
    assert vocab.tokens[:4] == ["<pad>", "<unk>", "<s>", "</s>"]
    small = build_vocab(["a a b"], min_count=2)
    assert "a" in small and "b" not in small
    assert small.id("b") == UNK_ID
    with pytest.raises(ValueError):
        build_vocab([])


def test_build_vocab_matches_counter():
    rnd = random.Random(7)
    words = [f"w{i}" for i in range(300)]
    corpus = [[rnd.choice(words[: rnd.randint(1, 300)]) for _ in range(100)] for _ in range(100)]
    counts = Counter(t for line in corpus for t in line)
    expected = [t for t, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
    assert build_vocab(corpus).tokens[4:] == expected
    assert build_vocab(corpus, max_size=10).tokens[4:] == expected[:10]
    assert build_vocab(corpus, min_count=5).tokens[4:] == [t for t in expected if counts[t] >= 5]


def test_jsonl_roundtrip_is_byte_identical(tmp_path):
    records = generate_synthetic_corpus("naming-longrange", 5) + generate_synthetic_corpus("nl-toy", 5)
    first = tmp_path / "a.jsonl"
    write_jsonl(first, records)
    second = tmp_path / "b.jsonl"
    write_jsonl(second, read_jsonl(first))
    assert first.read_bytes() == second.read_bytes()


def test_dumps_key_order_is_canonical():
    rec = {"target": ["x"], "id": "1", "schema": "sgs-v1", "zeta": 1, "alpha": 2}
    assert dumps(rec) == '{"schema":"sgs-v1","id":"1","target":["x"],"alpha":2,"zeta":1}'


def test_read_jsonl_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json}\n")
    with pytest.raises(DataError, match="bad.jsonl:1"):
        read_jsonl(bad)
    bad.write_text('{"schema": "other"}\n')
    with pytest.raises(DataError):
        read_jsonl(bad)


def test_method_record_roundtrip():
    rec = generate_synthetic_corpus("naming-longrange", 1, seed=4)[0]
    method = record_to_method(rec)
    assert method.target == rec["target"]
    assert [t for t, _ in method.tokens] == rec["tokens"]


def test_graph_record_roundtrip():
    rec = generate_synthetic_corpus("nl-toy", 1, seed=2)[0]
    g = record_graph(rec)
    grec = graph_record(g, rec["id"], rec["task"], rec["target"])
    assert graph_from_record(grec) == g
    assert record_graph(grec) == g


def test_document_record_validation():
    rec = generate_synthetic_corpus("nl-toy", 1)[0]
    rec["sentences"] = [[0, 1000]]
    with pytest.raises(Exception):
        record_to_document(rec)


def test_config_parsing():
    cfg = parse_config("# comment\nepochs = 3\ncopy = false\nlearning_rate = 0.01  # trailing\n", )
    assert cfg["epochs"] == 3 and cfg["copy"] is False and cfg["learning_rate"] == 0.01
    assert cfg["batch_size"] == DEFAULTS["batch_size"]
    for text in ("nonsense", "unknown = 1", "epochs = many", "copy = maybe"):
        with pytest.raises(DataError):
            parse_config(text)


def test_seed_environment_override(monkeypatch):
    assert apply_env({"seed": 1}, {"SGS_SEED": "42"})["seed"] == 42
    assert apply_env({"seed": 1}, {})["seed"] == 1
    monkeypatch.setenv("SGS_SEED", "9")
    assert parse_config("seed = 3")["seed"] == 9
    with pytest.raises(DataError):
        apply_env({"seed": 1}, {"SGS_SEED": "x"})


def test_edge_configs():
    code, nl = edge_configs("all")
    assert code == CodeGraphConfig() and nl == NlGraphConfig()
    code, nl = edge_configs("none")
    assert code.num_edge_types == 1 and nl.num_edge_types == 1
    code, nl = edge_configs("child,ref")
    assert code.child and not code.in_token and nl.coref_edges and not nl.sentence_nodes
    with pytest.raises(DataError):
        edge_configs("bogus")


def _tiny_model(dtype):
    samples = load_samples_from(generate_synthetic_corpus("copy-task", 4))
    vocab = vocabulary_for(samples)
    return SeqGnnModel(micro_config(len(vocab)).replace(edge_types=samples[0].graph.num_edge_types), vocab, seed=3, dtype=dtype)


def load_samples_from(records):
    from structsum.data import record_sample

    return [record_sample(r) for r in records]


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_checkpoint_roundtrip_is_bit_exact(tmp_path, dtype):
    model = _tiny_model(dtype)
    model.params.data[:] += np.random.default_rng(0).normal(size=model.params.size).astype(dtype)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, extra={"edges": "all"})
    loaded, extra = load_checkpoint(path, expected=model.cfg)
    assert extra == {"edges": "all"}
    assert loaded.params.data.dtype == dtype
    assert loaded.params.data.tobytes() == model.params.data.tobytes()
    assert loaded.vocab == model.vocab and loaded.cfg == model.cfg
    save_checkpoint(tmp_path / "again.ckpt", loaded, extra={"edges": "all"})
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_rejects_mismatches(tmp_path):
    model = _tiny_model(np.float32)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model)
    with pytest.raises(DataError, match="does not match"):
        load_checkpoint(path, expected=model.cfg.replace(timesteps=5))
    raw = path.read_bytes()
    manifest, _ = read_manifest(path)
    tampered = raw.replace(b'"timesteps":2', b'"timesteps":3')
    assert tampered != raw
    (tmp_path / "t.ckpt").write_bytes(tampered)
    with pytest.raises(DataError, match="hash"):
        load_checkpoint(tmp_path / "t.ckpt")
    (tmp_path / "x.ckpt").write_bytes(b"garbage")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "x.ckpt")
    (tmp_path / "short.ckpt").write_bytes(raw[:-4])
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "short.ckpt")


@pytest.mark.parametrize("kind", ["naming-longrange", "copy-task", "nl-toy"])
def test_synthetic_corpus_is_deterministic(kind):
    a = [dumps(r) for r in generate_synthetic_corpus(kind, 20, seed=11)]
    b = [dumps(r) for r in generate_synthetic_corpus(kind, 20, seed=11)]
    c = [dumps(r) for r in generate_synthetic_corpus(kind, 20, seed=12)]
    assert a == b
    assert a != c


def test_naming_samples_have_long_lexical_use_edges():
    for rec in generate_synthetic_corpus("naming-longrange", 100, seed=5):
        assert longest_lexical_use_span(rec) >= 20


def test_naming_target_subtokens_only_in_identifiers():
    for rec in generate_synthetic_corpus("naming-longrange", 50, seed=6):
        g = record_graph(rec)
        seq = g.node_labels[: g.sequence_length]
        assert "%NAME%" in seq
        for word in rec["target"]:
            assert word in seq


def test_copy_targets_appear_in_source():
    for rec in generate_synthetic_corpus("copy-task", 200, seed=0):
        assert rec["target"]
        assert all(t in rec["tokens"] for t in rec["target"])


def test_load_samples(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(path, generate_synthetic_corpus("copy-task", 3))
    samples = load_samples(path)
    assert len(samples) == 3 and all(s.target for s in samples)


def test_generator_errors():
    with pytest.raises(ValueError):
        generate_synthetic_corpus("unknown", 1)
    with pytest.raises(ValueError):
        generate_synthetic_corpus("copy-task", 0)
