"""Evaluation metrics over token sequences.

Inputs are lowercased before matching; there is no stemming and no stop-word
removal.  Corpus-level F1 and ROUGE scores are means of per-sample scores;
BLEU is computed at corpus level.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass


def _norm(tokens) -> list:
    return [t.lower() for t in tokens]


def _f(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def f1_subtoken(predicted, reference) -> tuple:
    """Multiset precision, recall and F1 of predicted subtokens.

    Two empty lists score 1.0; exactly one empty list scores 0.0.
    """
    pred, ref = _norm(predicted), _norm(reference)
    if not pred and not ref:
        return 1.0, 1.0, 1.0
    if not pred or not ref:
        return 0.0, 0.0, 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    p, r = overlap / len(pred), overlap / len(ref)
    return p, r, _f(p, r)


def ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n: int = 2) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    cand, ref = ngrams(_norm(candidate), n), ngrams(_norm(reference), n)
    if not cand or not ref:
        return 0.0
    overlap = sum((cand & ref).values())
    return _f(overlap / sum(cand.values()), overlap / sum(ref.values()))


def lcs_length(a, b) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference) -> float:
    cand, ref = _norm(candidate), _norm(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    return _f(lcs / len(cand), lcs / len(ref))


def bleu(candidates, references, max_order: int = 4) -> float:
    """Corpus BLEU with clipped n-gram precisions and a brevity penalty.

    An order of 2 or higher with no matching n-gram gets add-one smoothing,
    ``1 / (possible + 1)``, so a corpus without any matching 4-gram scores a
    small positive value instead of 0.  No unigram match at all scores 0.
    Returns a value in [0, 1].
    """
    if len(candidates) != len(references):
        raise ValueError("candidate and reference corpora differ in size")
    matches = [0] * max_order
    possible = [0] * max_order
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        cand, ref = _norm(cand), _norm(ref)
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            c, r = ngrams(cand, n), ngrams(ref, n)
            matches[n - 1] += sum((c & r).values())
            possible[n - 1] += max(len(cand) - n + 1, 0)
    if cand_len == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_order):
        if n == 0:
            if matches[0] == 0:
                return 0.0
            p = matches[0] / possible[0]
        elif matches[n] == 0:
            p = 1.0 / (possible[n] + 1)
        else:
            p = matches[n] / possible[n]
        log_p += math.log(p) / max_order
    bp = 1.0 if cand_len > ref_len else math.exp(1 - ref_len / cand_len)
    return bp * math.exp(log_p)


@dataclass
class MetricReport:
    f1: float
    rouge1: float
    rouge2: float
    rougeL: float
    bleu: float
    exact_match: float
    count: int

    def as_dict(self) -> dict:
        return asdict(self)


def corpus_report(predictions, references) -> MetricReport:
    if len(predictions) != len(references):
        raise ValueError("predictions and references differ in size")
    n = len(predictions)
    if n == 0:
        raise ValueError("empty corpus")
    mean = lambda xs: sum(xs) / n  # noqa: E731
    return MetricReport(
        f1=mean([f1_subtoken(p, r)[2] for p, r in zip(predictions, references)]),
        rouge1=mean([rouge_n(p, r, 1) for p, r in zip(predictions, references)]),
        rouge2=mean([rouge_n(p, r, 2) for p, r in zip(predictions, references)]),
        rougeL=mean([rouge_l(p, r) for p, r in zip(predictions, references)]),
        bleu=bleu(predictions, references),
        exact_match=mean([float(_norm(p) == _norm(r)) for p, r in zip(predictions, references)]),
        count=n,
    )
