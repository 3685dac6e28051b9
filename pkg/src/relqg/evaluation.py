"""Corpus BLEU-1..4, ROUGE-L, and the answer-distance bucket analysis.

BLEU follows the coco-caption scorer: clipped n-gram counts pooled over the
corpus, the reference length closest to each hypothesis (shorter on ties)
for the brevity penalty, cumulative geometric means up to n. A zero n-gram
match count yields exactly 0. ROUGE-L is the mean per-example LCS F-measure
with beta = 1.2.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .records import QGExample
from .stopwords import is_content_word

ROUGE_BETA = 1.2
NEAR_BUCKET = "0~10"
FAR_BUCKET = ">10"


def _check_inputs(hypotheses, references) -> None:
    if len(hypotheses) == 0:
        raise ValueError("cannot score an empty corpus")
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} reference sets")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _lower(seq):
    return [t.lower() for t in seq]


def bleu_n(hypotheses: Sequence[Sequence[str]],
           references: Sequence[Sequence[Sequence[str]]], n: int) -> float:
    """Corpus BLEU-n on a 0..100 scale."""
    _check_inputs(hypotheses, references)
    if n < 1:
        raise ValueError("n must be at least 1")
    correct = [0] * n
    guessed = [0] * n
    hyp_len = ref_len = 0
    for hyp, refs in zip(hypotheses, references):
        hyp = _lower(hyp)
        refs = [_lower(r) for r in refs]
        hyp_len += len(hyp)
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for k in range(1, n + 1):
            counts = _ngrams(hyp, k)
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= _ngrams(r, k)
            correct[k - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            guessed[k - 1] += max(len(hyp) - k + 1, 0)
    if min(correct) == 0:
        return 0.0
    log_p = sum(math.log(c / g) for c, g in zip(correct, guessed)) / n
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_p)


def _lcs(a: Sequence[str], b: Sequence[str]) -> int:
    ids: dict[str, int] = {}
    ai = np.array([ids.setdefault(t, len(ids)) for t in a], dtype=np.int64)
    bi = np.array([ids.setdefault(t, len(ids)) for t in b], dtype=np.int64)
    return int(kernels.lcs_length(ai, bi))


def rouge_l(hypotheses: Sequence[Sequence[str]],
            references: Sequence[Sequence[Sequence[str]]]) -> float:
    """Mean ROUGE-L F-measure on a 0..100 scale."""
    _check_inputs(hypotheses, references)
    total = 0.0
    for hyp, refs in zip(hypotheses, references):
        hyp = _lower(hyp)
        prec = rec = 0.0
        for ref in refs:
            ref = _lower(ref)
            lcs = _lcs(hyp, ref)
            if hyp:
                prec = max(prec, lcs / len(hyp))
            if ref:
                rec = max(rec, lcs / len(ref))
        if prec > 0 and rec > 0:
            b2 = ROUGE_BETA ** 2
            total += (1 + b2) * prec * rec / (rec + b2 * prec)
    return 100.0 * total / len(hypotheses)


@dataclass(frozen=True)
class MetricReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rouge_l: float
    n_examples: int

    def as_dict(self) -> dict:
        return {"bleu1": self.bleu1, "bleu2": self.bleu2, "bleu3": self.bleu3,
                "bleu4": self.bleu4, "meteor": None, "rouge_l": self.rouge_l,
                "n_examples": self.n_examples}

    def table(self) -> str:
        head = f"{'B1':>7} {'B2':>7} {'B3':>7} {'B4':>7} {'MET':>7} {'R-L':>7}"
        row = (f"{self.bleu1:7.2f} {self.bleu2:7.2f} {self.bleu3:7.2f} "
               f"{self.bleu4:7.2f} {'n/a':>7} {self.rouge_l:7.2f}")
        return head + "\n" + row


def evaluate(hypotheses, references) -> MetricReport:
    refs = [[r] if r and isinstance(r[0], str) else r for r in references]
    return MetricReport(*(bleu_n(hypotheses, refs, n) for n in range(1, 5)),
                        rouge_l(hypotheses, refs), len(hypotheses))


# -- answer distance ------------------------------------------------------------


def avg_relative_distance(example: QGExample) -> float | None:
    """Mean distance from the answer span to sentence words (outside the
    span, non-stop) whose lower form occurs in the question."""
    q = {t.lower for t in example.question}
    start, end = example.answer.start, example.answer.end
    dists = []
    for i, tok in enumerate(example.sentence):
        if start <= i <= end or not is_content_word(tok.lower) or tok.lower not in q:
            continue
        dists.append(start - i if i < start else i - end)
    return sum(dists) / len(dists) if dists else None


@dataclass(frozen=True)
class Bucket:
    label: str
    n_examples: int
    share: float
    metrics: MetricReport | None

    def as_dict(self) -> dict:
        return {"label": self.label, "n_examples": self.n_examples, "share": self.share,
                "metrics": self.metrics.as_dict() if self.metrics else None}


@dataclass(frozen=True)
class DistanceBucketReport:
    buckets: tuple[Bucket, ...]
    n_total: int
    min_sentence_len: int | None

    def as_dict(self) -> dict:
        return {"buckets": [b.as_dict() for b in self.buckets], "n_total": self.n_total,
                "min_sentence_len": self.min_sentence_len}

    def table(self) -> str:
        lines = [f"{'Distance':<22} {'B1':>7} {'B2':>7} {'B3':>7} {'B4':>7} {'MET':>7} {'R-L':>7}"]
        for b in self.buckets:
            label = f"{b.label} ({100 * b.share:.1f}% of #)"
            m = b.metrics
            if m is None:
                lines.append(f"{label:<22} " + " ".join(f"{'-':>7}" for _ in range(6)))
            else:
                lines.append(f"{label:<22} {m.bleu1:7.2f} {m.bleu2:7.2f} {m.bleu3:7.2f} "
                             f"{m.bleu4:7.2f} {'n/a':>7} {m.rouge_l:7.2f}")
        return "\n".join(lines)


def bucket_of(example: QGExample) -> str:
    d = avg_relative_distance(example)
    return NEAR_BUCKET if d is None or d <= 10 else FAR_BUCKET


def distance_bucket_analysis(corpus: Sequence[QGExample],
                             predictions: Sequence[Sequence[str]],
                             min_sentence_len: int | None = None) -> DistanceBucketReport:
    """Score predictions separately for near (0~10) and far (>10) examples.

    With ``min_sentence_len`` only sentences longer than that many tokens are
    bucketed; shares stay relative to the whole corpus.
    """
    if len(corpus) != len(predictions):
        raise ValueError(f"{len(corpus)} examples but {len(predictions)} predictions")
    if not corpus:
        raise ValueError("cannot analyze an empty corpus")
    groups: dict[str, list[int]] = {NEAR_BUCKET: [], FAR_BUCKET: []}
    for i, ex in enumerate(corpus):
        if min_sentence_len is not None and len(ex.sentence) <= min_sentence_len:
            continue
        groups[bucket_of(ex)].append(i)
    buckets = []
    for label, idx in groups.items():
        metrics = None
        if idx:
            metrics = evaluate([predictions[i] for i in idx],
                               [[[t.surface for t in corpus[i].question]] for i in idx])
        buckets.append(Bucket(label, len(idx), len(idx) / len(corpus), metrics))
    return DistanceBucketReport(tuple(buckets), len(corpus), min_sentence_len)


# -- predictions file -------------------------------------------------------------


def save_predictions(path: str | os.PathLike, predictions: Sequence[tuple[str, list[str]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, tokens in predictions:
            fh.write(json.dumps({"id": ex_id, "tokens": list(tokens)}, ensure_ascii=False) + "\n")


def load_predictions(path: str | os.PathLike) -> list[tuple[str, list[str]]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append((str(rec["id"]), [str(t) for t in rec["tokens"]]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}: malformed prediction on line {lineno}: {exc}") from None
    return out


def align(predictions: Sequence[tuple[str, list[str]]],
          corpus: Sequence[QGExample]) -> list[list[str]]:
    """Order predictions like the corpus; raise on the first id mismatch."""
    by_id = dict(predictions)
    if len(by_id) != len(predictions):
        raise ValueError("duplicate ids in predictions")
    for ex in corpus:
        if ex.id not in by_id:
            raise ValueError(f"no prediction for example id {ex.id!r}")
    known = {ex.id for ex in corpus}
    for ex_id, _ in predictions:
        if ex_id not in known:
            raise ValueError(f"prediction id {ex_id!r} not in the reference corpus")
    return [by_id[ex.id] for ex in corpus]
