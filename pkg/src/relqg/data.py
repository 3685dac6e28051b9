"""Corpus ingestion, filtering, vocabulary and answer-position tags.

Corpora are UTF-8 JSON Lines, one pre-tokenized example per line. Tokens are
never re-tokenized here.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .records import (
    NEUTRAL_TAG,
    AnswerSpan,
    NaryRelation,
    QGExample,
    RelationContext,
    Token,
)
from .stopwords import is_content_word

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(4)

ANSWER_TAG_IDS = {"O": 0, "B": 1, "I": 2}


class CorpusError(ValueError):
    pass


# -- corpus I/O --------------------------------------------------------------


def _tokens(surfaces, pos=None, ner=None) -> tuple[Token, ...]:
    n = len(surfaces)
    pos = pos if pos is not None else [NEUTRAL_TAG] * n
    ner = ner if ner is not None else [NEUTRAL_TAG] * n
    if len(pos) != n or len(ner) != n:
        raise ValueError("pos/ner tag count does not match token count")
    return tuple(Token(str(s), str(p), str(t)) for s, p, t in zip(surfaces, pos, ner))


def example_from_record(rec: dict) -> QGExample:
    ex_id = str(rec["id"])
    sentence = _tokens(rec["sentence_tokens"], rec.get("pos"), rec.get("ner"))
    span = AnswerSpan(int(rec["answer_start"]), int(rec["answer_end"]))
    if not span.within(len(sentence)):
        raise CorpusError(f"example {ex_id}: answer span out of bounds "
                          f"({span.start}, {span.end}) for {len(sentence)} tokens")
    relations = tuple(
        NaryRelation(tuple(str(a) for a in r["args"]), float(r["confidence"]), k)
        for k, r in enumerate(rec.get("relations") or ()))
    context = None
    if rec.get("relation_context") is not None:
        rc = rec["relation_context"]
        context = RelationContext(_tokens(rc["tokens"]), tuple(rc["answer_tags"]),
                                  rc.get("source_index"))
    return QGExample(ex_id, sentence, span, _tokens(rec["question_tokens"]),
                     relations, context)


def example_to_record(ex: QGExample) -> dict:
    rec = {
        "id": ex.id,
        "sentence_tokens": [t.surface for t in ex.sentence],
        "pos": [t.pos for t in ex.sentence],
        "ner": [t.ner for t in ex.sentence],
        "answer_start": ex.answer.start,
        "answer_end": ex.answer.end,
        "question_tokens": [t.surface for t in ex.question],
        "relations": [{"args": list(r.args), "confidence": r.confidence}
                      for r in ex.relations],
    }
    if ex.context is not None:
        rec["relation_context"] = {
            "tokens": [t.surface for t in ex.context.tokens],
            "answer_tags": list(ex.context.answer_tags),
            "provenance": ex.context.provenance,
            "source_index": ex.context.source_index,
        }
    return rec


def load_corpus(path: str | os.PathLike) -> list[QGExample]:
    """Read a JSONL corpus. Missing tags become ``"X"``; missing relations
    become an empty list."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise TypeError("record is not a JSON object")
            except (json.JSONDecodeError, TypeError) as exc:
                raise CorpusError(f"{path}: malformed record on line {lineno}: {exc}") from None
            try:
                examples.append(example_from_record(rec))
            except CorpusError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}: invalid record on line {lineno}: {exc}") from None
    return examples


def save_corpus(path: str | os.PathLike, corpus: Iterable[QGExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in corpus:
            fh.write(json.dumps(example_to_record(ex), ensure_ascii=False) + "\n")


# -- filtering ---------------------------------------------------------------


def content_overlap(a: Iterable[Token], b: Iterable[Token]) -> set[str]:
    """Lower-cased non-stop words present in both token sequences."""
    left = {t.lower for t in a if is_content_word(t.lower)}
    return left & {t.lower for t in b}


def filter_corpus(corpus: Iterable[QGExample]) -> list[QGExample]:
    """Drop examples whose question shares no non-stop word with the sentence."""
    return [ex for ex in corpus if content_overlap(ex.question, ex.sentence)]


# -- vocabulary --------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Word ids (reserved ids first) plus POS and NER tag inventories."""

    words: tuple[str, ...]
    pos_tags: tuple[str, ...] = (NEUTRAL_TAG,)
    ner_tags: tuple[str, ...] = (NEUTRAL_TAG,)

    def __post_init__(self):
        if self.words[:4] != RESERVED:
            raise ValueError("vocabulary must start with the reserved tokens")
        if len(set(self.words)) != len(self.words):
            raise ValueError("duplicate vocabulary entries")
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})
        object.__setattr__(self, "_pos", {t: i for i, t in enumerate(self.pos_tags)})
        object.__setattr__(self, "_ner", {t: i for i, t in enumerate(self.ner_tags)})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._index

    def id(self, word: str) -> int:
        return self._index.get(word.lower(), UNK_ID)

    def word(self, idx: int) -> str:
        return self.words[idx]

    def pos_id(self, tag: str) -> int:
        return self._pos.get(tag, self._pos[NEUTRAL_TAG])

    def ner_id(self, tag: str) -> int:
        return self._ner.get(tag, self._ner[NEUTRAL_TAG])

    def to_json(self) -> dict:
        return {"words": list(self.words), "pos_tags": list(self.pos_tags),
                "ner_tags": list(self.ner_tags)}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls(tuple(obj["words"]), tuple(obj["pos_tags"]), tuple(obj["ner_tags"]))

    @property
    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False, indent=0) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def build_vocabulary(corpus: Sequence[QGExample], cap: int) -> Vocabulary:
    """Most frequent lower-cased sentence+question words, ties broken
    lexicographically, capped at ``cap`` non-reserved entries."""
    if cap <= 0:
        raise ValueError(f"vocabulary cap must be positive, got {cap}")
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    pos, ner = set(), set()
    for ex in corpus:
        counts.update(t.lower for t in ex.sentence)
        counts.update(t.lower for t in ex.question)
        pos.update(t.pos for t in ex.sentence)
        ner.update(t.ner for t in ex.sentence)
    for w in RESERVED:
        counts.pop(w, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:cap]
    pos.discard(NEUTRAL_TAG)
    ner.discard(NEUTRAL_TAG)
    return Vocabulary(RESERVED + tuple(w for w, _ in ranked),
                      (NEUTRAL_TAG,) + tuple(sorted(pos)),
                      (NEUTRAL_TAG,) + tuple(sorted(ner)))


# -- answer tags and embeddings ---------------------------------------------


def bio_tags(length: int, span: AnswerSpan) -> list[str]:
    if length <= 0 or not span.within(length):
        raise ValueError(f"answer span ({span.start}, {span.end}) outside [0, {length})")
    tags = ["O"] * length
    tags[span.start] = "B"
    for i in range(span.start + 1, span.end + 1):
        tags[i] = "I"
    return tags


def load_pretrained_embeddings(path: str | os.PathLike, vocab: Vocabulary,
                               table: np.ndarray) -> int:
    """Copy vectors for vocabulary words found in a GloVe-style text file into
    ``table`` (rows indexed by word id). Returns the number of rows filled."""
    dim = table.shape[1]
    filled = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            word = parts[0].lower()
            idx = vocab._index.get(word)
            if idx is None or idx < len(RESERVED) or idx in filled:
                continue
            if len(parts) - 1 != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values for {parts[0]!r}, "
                                 f"got {len(parts) - 1}")
            table[idx] = np.asarray(parts[1:], dtype=np.float64)
            filled.add(idx)
    return len(filled)
