"""Answer-relevant relation selection and sentence-vs-relation statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .data import bio_tags, content_overlap
from .records import NaryRelation, QGExample, RelationContext, Token
from .stopwords import is_content_word

__all__ = [
    "NaryRelation",
    "RelationContext",
    "RelationStats",
    "corpus_relation_stats",
    "linearize",
    "select_relation",
    "tag_relation_answer",
]


def linearize(relation: NaryRelation) -> list[Token]:
    """Join all arguments into one token sequence (whitespace split per argument)."""
    tokens = [Token(w) for arg in relation.args for w in arg.split()]
    if not tokens:
        raise ValueError("relation has only empty arguments")
    return tokens


def answer_overlap(answer: Sequence[Token], relation_tokens: Sequence[Token]) -> int:
    """Answer token occurrences matched one-to-one against relation tokens."""
    a = Counter(t.lower for t in answer)
    r = Counter(t.lower for t in relation_tokens)
    return sum(min(n, r[w]) for w, n in a.items())


def tag_relation_answer(tokens: Sequence[Token], answer: Sequence[Token]) -> list[str]:
    """Mark the earliest longest contiguous run shared with the answer as B, I, ..."""
    rel = [t.lower for t in tokens]
    ans = [t.lower for t in answer]
    best_len, best_start = 0, 0
    # longest common substring, O(n*m) DP over suffix-match lengths
    prev = [0] * (len(ans) + 1)
    for i, w in enumerate(rel):
        cur = [0] * (len(ans) + 1)
        for j, a in enumerate(ans):
            if w == a:
                cur[j + 1] = prev[j] + 1
                run = cur[j + 1]
                start = i - run + 1
                if run > best_len or (run == best_len and start < best_start):
                    best_len, best_start = run, start
        prev = cur
    tags = ["O"] * len(rel)
    if best_len:
        tags[best_start] = "B"
        for k in range(best_start + 1, best_start + best_len):
            tags[k] = "I"
    return tags


def _selection_key(rel: NaryRelation, tokens: list[Token], answer: Sequence[Token]):
    non_stop = sum(1 for t in tokens if is_content_word(t.lower))
    # max over (overlap, confidence, non-stop); min source_index on full ties
    return (answer_overlap(answer, tokens), rel.confidence, non_stop, -rel.source_index)


def select_relation(example: QGExample) -> RelationContext:
    """Pick the most answer-relevant relation, or fall back to the sentence.

    Criteria in order: answer-token overlap, extractor confidence, number of
    non-stop words, then lowest position in the relation list.
    """
    answer = example.answer_tokens
    if not example.relations:
        return RelationContext(example.sentence,
                               bio_tags(len(example.sentence), example.answer), None)
    best = max(
        ((rel, linearize(rel)) for rel in example.relations),
        key=lambda pair: _selection_key(pair[0], pair[1], answer),
    )
    rel, tokens = best
    return RelationContext(tokens, tag_relation_answer(tokens, answer), rel.source_index)


@dataclass(frozen=True)
class RelationStats:
    avg_sentence_len: float
    avg_relation_len: float
    overlap_sentence: float
    overlap_relation: float
    copy_ratio_sentence: float
    copy_ratio_relation: float
    n_examples: int

    def as_dict(self) -> dict:
        return {
            "avg_sentence_len": self.avg_sentence_len,
            "avg_relation_len": self.avg_relation_len,
            "overlap_sentence": self.overlap_sentence,
            "overlap_relation": self.overlap_relation,
            "copy_ratio_sentence": self.copy_ratio_sentence,
            "copy_ratio_relation": self.copy_ratio_relation,
            "n_examples": self.n_examples,
        }


def corpus_relation_stats(corpus: Sequence[QGExample]) -> RelationStats:
    """Length, question-overlap and copy-ratio averages for both sources.

    The copy ratio is corpus-level: total overlapping words over total
    source tokens. Examples without a stored context are run through
    :func:`select_relation`.
    """
    if not corpus:
        raise ValueError("corpus_relation_stats needs at least one example")
    s_len = r_len = s_ov = r_ov = 0
    for ex in corpus:
        ctx = ex.context if ex.context is not None else select_relation(ex)
        s_len += len(ex.sentence)
        r_len += len(ctx.tokens)
        s_ov += len(content_overlap(ex.sentence, ex.question))
        r_ov += len(content_overlap(ctx.tokens, ex.question))
    n = len(corpus)
    return RelationStats(s_len / n, r_len / n, s_ov / n, r_ov / n,
                         s_ov / s_len, r_ov / r_len, n)
