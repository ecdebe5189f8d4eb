"""The command-line workflow, driven from Python (each call equals a shell command)."""

import tempfile
from pathlib import Path

from structsum.cli import main

work = Path(tempfile.mkdtemp())
data, graphs, ckpt = work / "train.jsonl", work / "graphs.jsonl", work / "model.ckpt"
(work / "small.cfg").write_text("embedding_dim = 16\nencoder_hidden = 16\ngnn_hidden = 16\ntimesteps = 2\n"
                                "decoder_hidden = 32\nepochs = 3\nmax_len = 6\n")

main(["gen-data", "--kind", "naming-longrange", "--size", "40", "--seed", "0", "--out", str(data)])
main(["build-graphs", str(data), str(graphs), "--edges", "child,lastlexicaluse"])
main(["stats", str(graphs)])
main(["train", str(data), "--config", str(work / "small.cfg"), "--out", str(ckpt)])
main(["evaluate", str(data), "--checkpoint", str(ckpt)])
main(["predict", "--checkpoint", str(ckpt), str(data)])
main(["grad-check", "--seeds", "3"])
